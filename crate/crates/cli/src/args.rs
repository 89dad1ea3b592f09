use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "stickyflow", version, about = "Sticky Brownian families, lattice flows and their checks")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Global {
    /// Master seed; falls back to the config file, then STICKYFLOW_SEED, then 42.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Monte Carlo replicas.
    #[arg(long, global = true)]
    pub replicas: Option<usize>,
    /// Worker threads for Monte Carlo runs.
    #[arg(long, global = true)]
    pub parallelism: Option<usize>,
    /// Output file instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// JSON file whose keys mirror the long flags; flags given on the command line win.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build, validate and convert parameter families.
    #[command(subcommand)]
    Params(ParamsCommand),
    /// Kernels and particles of the lattice flow.
    #[command(subcommand)]
    Flow(FlowCommand),
    /// The N-point lattice chain.
    #[command(subcommand)]
    Chain(ChainCommand),
    /// The sticky half-plane diffusion.
    #[command(subcommand)]
    Halfplane(HalfplaneCommand),
    /// Statistical checks and the acceptance suite.
    #[command(subcommand)]
    Verify(VerifyCommand),
}

#[derive(Debug, Subcommand)]
pub enum ParamsCommand {
    /// θ-family from a splitting measure ν and a drift.
    FromNu {
        /// `x:w,...`, `uniform:c`, `endpoints` or a JSON file.
        #[arg(long, alias = "nu")]
        atoms: String,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        beta: f64,
        #[arg(long)]
        n_max: usize,
    },
    /// p-family from a probability measure μ.
    FromMu {
        #[arg(long, alias = "atoms")]
        mu: String,
        #[arg(long)]
        n_max: usize,
    },
    /// Lists consistency and range violations of a family file; exits 2 if any.
    Validate {
        #[arg(long)]
        family: PathBuf,
    },
    /// Transforms a θ-family file.
    Convert {
        #[arg(long)]
        family: PathBuf,
        /// Lattice family `p_n` at resolution `n`.
        #[arg(long, conflicts_with_all = ["gauge_shift", "drift_transform"])]
        n: Option<f64>,
        /// Adds `α` to the boundary entries.
        #[arg(long, allow_hyphen_values = true, conflicts_with = "drift_transform")]
        gauge_shift: Option<f64>,
        /// Moves the drift into the boundary entries.
        #[arg(long)]
        drift_transform: bool,
    },
}

#[derive(Debug, Args)]
pub struct FlowWindow {
    #[arg(long)]
    pub mu: String,
    #[arg(long, default_value_t = 0.0)]
    pub s: f64,
    #[arg(long)]
    pub t: f64,
    /// Environment horizon; defaults to the end of the window.
    #[arg(long)]
    pub horizon: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum FlowCommand {
    /// Kernel row `K_{s,t}(x0, ·)` as site, weight.
    Kernel {
        #[command(flatten)]
        window: FlowWindow,
        #[arg(long, allow_hyphen_values = true)]
        x0: i64,
    },
    /// Largest difference between `K_{s,u}` and `K_{s,t} K_{t,u}`.
    Compose {
        #[command(flatten)]
        window: FlowWindow,
        #[arg(long, allow_hyphen_values = true)]
        x0: i64,
        #[arg(long)]
        u: f64,
    },
    /// Particles moving in one sampled environment.
    Particles {
        #[command(flatten)]
        window: FlowWindow,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        x0: Vec<i64>,
    },
}

#[derive(Debug, Args)]
pub struct FamilySource {
    /// Splitting law μ of the lattice flow.
    #[arg(long, group = "source")]
    pub mu: Option<String>,
    /// Splitting measure ν of a θ-family; needs `--n`.
    #[arg(long, group = "source")]
    pub nu: Option<String>,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub beta: f64,
    /// θ- or p-family file; θ-families need `--n`.
    #[arg(long, group = "source")]
    pub family: Option<PathBuf>,
    /// Resolution turning a θ-family into lattice rates.
    #[arg(long)]
    pub n: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum ChainCommand {
    /// Lattice path with columns time, x_1..x_N.
    Simulate {
        #[command(flatten)]
        source: FamilySource,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        x0: Vec<i64>,
        #[arg(long)]
        horizon: f64,
    },
    /// Rescales a lattice path CSV: space by `n^{-1/2}`, time by `1/n`.
    Rescale {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        n: f64,
    },
    /// Approximate sticky Brownian motion, columns time, eta.
    StickyBm {
        #[arg(long)]
        theta0: f64,
        #[arg(long, default_value_t = 0.0)]
        y0: f64,
        #[arg(long)]
        horizon: f64,
        #[arg(long, default_value_t = 1e4)]
        n: f64,
    },
}

#[derive(Debug, Args)]
pub struct HalfplaneData {
    #[arg(long, default_value_t = 1.0)]
    pub a0: f64,
    #[arg(long)]
    pub theta0: f64,
    /// Start point `x,y` with `y >= 0`.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_values_t = [0.0, 0.0])]
    pub start: Vec<f64>,
    #[arg(long, default_value_t = 1e4)]
    pub n: f64,
}

#[derive(Debug, Subcommand)]
pub enum HalfplaneCommand {
    /// Curve `t ↦ P(η(t) = 0)` from zero.
    F {
        #[arg(long)]
        theta0: f64,
        #[arg(long, default_value_t = 1.0)]
        t_max: f64,
        #[arg(long, default_value_t = 101)]
        points: usize,
    },
    /// Path with columns time, xi, eta.
    Simulate {
        #[command(flatten)]
        data: HalfplaneData,
        #[arg(long)]
        horizon: f64,
    },
    /// Exit points from a strip or a triangle, one row per replica.
    Exit {
        #[command(flatten)]
        data: HalfplaneData,
        /// Strip `0 < x < eps`.
        #[arg(long, group = "region")]
        strip: Option<f64>,
        /// Triangle `eps,phi1,phi2`.
        #[arg(long, group = "region", value_delimiter = ',')]
        triangle: Option<Vec<f64>>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    Acceptance,
}

#[derive(Debug, Subcommand)]
pub enum VerifyCommand {
    /// Runs a suite; exits 1 if any gate fails.
    Run {
        #[arg(long, value_enum, default_value_t = Suite::Acceptance)]
        suite: Suite,
        /// Restricts the run to these criteria, e.g. `A1,A8`.
        #[arg(long, value_delimiter = ',')]
        only: Vec<String>,
    },
    /// Exit statistics of the θ-family from the diagonal.
    ExitStats {
        #[arg(long)]
        nu: String,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        beta: f64,
        #[arg(long)]
        dim: usize,
        #[arg(long)]
        eps: f64,
        #[arg(long, default_value_t = 1e4)]
        n: f64,
    },
    /// Pair exit-time moments against their exact values; exits 1 on failure.
    Moments {
        #[arg(long, default_value_t = 1.0)]
        theta11: f64,
        #[arg(long, default_value_t = 0.2)]
        eps: f64,
        #[arg(long, default_value_t = 1e4)]
        n: f64,
        #[arg(long, default_value_t = 0.003)]
        tol_mean: f64,
        #[arg(long, default_value_t = 0.0008)]
        tol_second: f64,
    },
    /// Flow particles against the lattice chain; exits 1 on rejection.
    Equivalence {
        #[arg(long)]
        mu: String,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        x0: Vec<i64>,
        #[arg(long)]
        t: f64,
    },
}
