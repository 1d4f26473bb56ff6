use std::net::SocketAddr;
use std::ops::Range;
use std::path::PathBuf;

use activeclust::config::{DatasetSource, KernelKind, PreparedData, SessionConfig};
use activeclust::data::LabelColumn;
use activeclust::runner::{default_threads, run_session, save_curve_csv, save_json, sweep, write_curve_csv};
use activeclust::service::{serve, ServiceConfig};
use activeclust::session_file::{load_session, save_session};
use activeclust::synth::gaussian_blobs;
use activeclust_core::engine::{ClusterCount, EngineConfig, Strategy};
use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "activeclust", version, about = "Active constrained spectral clustering")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulated session and write its learning curve.
    Run {
        #[command(flatten)]
        setup: Setup,
        #[arg(long)]
        seed: Option<u64>,
        /// Curve CSV; a JSON copy is written next to it.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Save the final session state.
        #[arg(long)]
        save_session: Option<PathBuf>,
        /// Continue a saved session instead of starting a new one.
        #[arg(long, conflicts_with = "data")]
        resume: Option<PathBuf>,
    },
    /// Run a range of seeds and report mean final metrics.
    Sweep {
        #[command(flatten)]
        setup: Setup,
        /// Half-open seed range `a..b`.
        #[arg(long, default_value = "0..10")]
        seeds: String,
        #[arg(long)]
        threads: Option<usize>,
        /// Per-seed final metrics as CSV; a JSON summary is written next to it.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write synthetic Gaussian blobs as a labelled CSV.
    Synth {
        #[arg(long)]
        clusters: usize,
        #[arg(long)]
        per_cluster: usize,
        #[arg(long, default_value_t = 2)]
        dim: usize,
        /// Radius of the circle the centres sit on.
        #[arg(long, default_value_t = 10.0)]
        radius: f64,
        /// Per-coordinate standard deviation.
        #[arg(long, default_value_t = 1.0)]
        spread: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Serve interactive sessions over HTTP.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        /// Base directory for dataset paths and auto-saved sessions.
        #[arg(long)]
        data_dir: Option<PathBuf>,
        /// UI bundle served under `/ui`.
        #[arg(long)]
        static_dir: Option<PathBuf>,
        /// Allowed CORS origin (any when omitted).
        #[arg(long)]
        cors_origin: Option<String>,
    },
}

#[derive(Args)]
struct Setup {
    /// JSON session config; command-line flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long, value_enum)]
    kernel: Option<KernelKind>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    /// Label column by header name or zero-based index.
    #[arg(long)]
    label: Option<LabelColumn>,
    /// Label file for precomputed matrices.
    #[arg(long)]
    labels: Option<PathBuf>,
    #[arg(long)]
    standardize: bool,
    #[arg(long)]
    strategy: Option<Strategy>,
    #[arg(long)]
    budget: Option<usize>,
    #[arg(long)]
    noise: Option<f64>,
    /// Cluster count: an integer or `auto`.
    #[arg(long)]
    k: Option<String>,
    #[arg(long)]
    b: Option<usize>,
    #[arg(long)]
    knn: Option<usize>,
    #[arg(long)]
    eval_every: Option<usize>,
}

fn parse_k(s: &str) -> Result<ClusterCount> {
    match s {
        "auto" => Ok(ClusterCount::Unknown),
        n => Ok(ClusterCount::Known(n.parse().with_context(|| format!("--k expects an integer or auto, got {n:?}"))?)),
    }
}

impl Setup {
    fn config(&self, seed: Option<u64>) -> Result<SessionConfig> {
        let mut cfg = match &self.config {
            Some(p) => SessionConfig::load(p)?,
            None => {
                let Some(data) = &self.data else { bail!("either --config or --data is required") };
                SessionConfig {
                    dataset: DatasetSource {
                        label_column: Some(LabelColumn::Name("class".into())),
                        ..DatasetSource::new(data)
                    },
                    engine: EngineConfig::new(Strategy::UrascN, ClusterCount::Unknown, 100, 0),
                }
            }
        };
        let (ds, e) = (&mut cfg.dataset, &mut cfg.engine);
        if let Some(v) = &self.data {
            ds.path.clone_from(v);
        }
        if let Some(v) = self.kernel {
            ds.kernel = v;
        }
        ds.sigma = self.sigma.or(ds.sigma);
        ds.gamma = self.gamma.or(ds.gamma);
        if let Some(v) = &self.label {
            ds.label_column = Some(v.clone());
        }
        if let Some(v) = &self.labels {
            ds.labels_path = Some(v.clone());
        }
        ds.standardize |= self.standardize;
        if let Some(v) = self.strategy {
            e.strategy = v;
        }
        if let Some(v) = self.budget {
            e.query_budget = v;
        }
        if let Some(v) = self.noise {
            e.noise_rate = v;
        }
        if let Some(v) = &self.k {
            e.n_c = parse_k(v)?;
        }
        if let Some(v) = seed {
            e.seed = v;
        }
        e.b = self.b.unwrap_or(e.b);
        e.knn_k = self.knn.unwrap_or(e.knn_k);
        e.eval_every = self.eval_every.unwrap_or(e.eval_every);
        cfg.validate()?;
        Ok(cfg)
    }

    fn prepare(&self, cfg: &SessionConfig) -> Result<PreparedData> {
        let base = self.config.as_ref().and_then(|p| p.parent().map(PathBuf::from));
        let data = if self.data.is_some() { cfg.dataset.prepare(None) } else { cfg.dataset.prepare(base.as_deref()) };
        let data = data.with_context(|| format!("loading {}", cfg.dataset.path.display()))?;
        if let Some(bw) = data.bandwidth {
            log::info!("kernel bandwidth {bw}");
        }
        Ok(data)
    }
}

fn parse_seeds(s: &str) -> Result<Range<u64>> {
    let (a, b) = s.split_once("..").with_context(|| format!("--seeds expects a..b, got {s:?}"))?;
    let range = a.trim().parse()?..b.trim().parse()?;
    if range.is_empty() {
        bail!("empty seed range {s:?}");
    }
    Ok(range)
}

fn json_sibling(path: &std::path::Path) -> PathBuf {
    path.with_extension("json")
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::Run { setup, seed, out, save_session: save_to, resume } => {
            let (mut session, cfg) = match &resume {
                Some(path) => {
                    let (session, cfg) = load_session(path)?;
                    log::info!(
                        "resuming at iteration {} with {} queries used",
                        session.iteration(),
                        session.queries_used()
                    );
                    (session, cfg)
                }
                None => {
                    let cfg = setup.config(seed)?;
                    let session = setup.prepare(&cfg)?.session(&cfg.engine)?;
                    (session, Some(cfg))
                }
            };
            run_session(&mut session)?;
            match &out {
                Some(path) => {
                    save_curve_csv(path, session.curve())?;
                    save_json(&json_sibling(path), &session.curve())?;
                }
                None => write_curve_csv(std::io::stdout().lock(), session.curve())?,
            }
            if let Some(path) = &save_to {
                save_session(path, &session, cfg.as_ref())?;
            }
            if let Some(last) = session.curve().last() {
                log::info!(
                    "finished: {} queries, n_c {}, jcc {:?}, v-measure {:?}",
                    last.queries_used,
                    last.n_c,
                    last.jcc,
                    last.v_measure
                );
            }
        }
        Command::Sweep { setup, seeds, threads, out } => {
            let cfg = setup.config(None)?;
            let data = setup.prepare(&cfg)?;
            let summary = sweep(&data, &cfg.engine, parse_seeds(&seeds)?, threads.unwrap_or_else(default_threads))?;
            let mut csv = String::from("seed,queries,jcc,vmeasure,n_c\n");
            for r in &summary.runs {
                let last = r.final_point();
                let fmt = |v: Option<f64>| v.map_or_else(String::new, |x| x.to_string());
                csv.push_str(&format!(
                    "{},{},{},{},{}\n",
                    r.seed,
                    r.queries_used,
                    fmt(last.and_then(|p| p.jcc)),
                    fmt(last.and_then(|p| p.v_measure)),
                    r.final_n_c
                ));
            }
            match &out {
                Some(path) => {
                    std::fs::write(path, csv).with_context(|| format!("writing {}", path.display()))?;
                    save_json(&json_sibling(path), &summary)?;
                }
                None => print!("{csv}"),
            }
            println!(
                "strategy {} over {} seeds: mean jcc {:?}, mean v-measure {:?}, mean queries {:.1}",
                cfg.engine.strategy,
                summary.runs.len(),
                summary.mean_jcc,
                summary.mean_v_measure,
                summary.mean_queries
            );
        }
        Command::Synth { clusters, per_cluster, dim, radius, spread, seed, out } => {
            if dim < 2 || clusters == 0 || per_cluster == 0 {
                bail!("need at least one cluster, one sample per cluster and two dimensions");
            }
            let ds = gaussian_blobs(clusters, per_cluster, dim, radius, spread, seed);
            let mut text: String = (0..dim).map(|d| format!("x{d},")).collect();
            text.push_str("class\n");
            let labels = ds.labels().expect("blobs are labelled");
            for (i, l) in labels.iter().enumerate() {
                for v in ds.features().row(i) {
                    text.push_str(&format!("{v},"));
                }
                text.push_str(&format!("{l}\n"));
            }
            std::fs::write(&out, text).with_context(|| format!("writing {}", out.display()))?;
        }
        Command::Serve { port, host, data_dir, static_dir, cors_origin } => {
            let addr: SocketAddr = format!("{host}:{port}").parse().context("bad --host/--port")?;
            let cfg = ServiceConfig { data_dir, static_dir, cors_origin, ..ServiceConfig::default() };
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(async move {
                let listener = tokio::net::TcpListener::bind(addr).await?;
                log::info!("listening on http://{}", listener.local_addr()?);
                serve(listener, cfg).await
            })?;
        }
    }
    Ok(())
}
