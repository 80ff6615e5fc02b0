use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use orbitspace::fiber::Connectivity;

#[derive(Debug, Parser)]
#[command(name = "orbitspace", version, about = "Orbits, fibers and orbit spaces of integrable Hamiltonian systems")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Involution of all pairs and the rank of DF over the box.
    Check(One),
    /// Rank statistics of DF, and the rank at --seed-point if given.
    Rank(One),
    /// Orbit through --seed-point: exploration against the fiber, or one
    /// trajectory with --time.
    Orbit(One),
    /// Fiber F^-1(--value) and its components.
    Fiber(One),
    /// Component counts over --lattice.
    Scan(One),
    /// Discretized orbit space over --lattice with its base-space graph.
    Atlas(One),
    /// Whether mu is injective over --lattice.
    Mu(One),
    /// Equivalence of two systems on the same box.
    Equiv(Two),
    /// Symplectic equivalence via --map (identity by default).
    Sympeq(Two),
    /// Whether the sampled image looks closed.
    Closedness(One),
    /// Blow-up search for incomplete vector fields.
    ProbeComplete(One),
}

#[derive(Debug, Args)]
pub struct One {
    pub config: PathBuf,
    #[command(flatten)]
    pub flags: Flags,
}

#[derive(Debug, Args)]
pub struct Two {
    pub first: PathBuf,
    pub second: PathBuf,
    #[command(flatten)]
    pub flags: Flags,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, ValueEnum)]
pub enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, ValueEnum)]
pub enum ConnectivityArg {
    #[default]
    Face,
    Corner,
}

impl From<ConnectivityArg> for Connectivity {
    fn from(c: ConnectivityArg) -> Self {
        match c {
            ConnectivityArg::Face => Connectivity::Face,
            ConnectivityArg::Corner => Connectivity::Corner,
        }
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// Image value, one entry per integral.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub value: Option<Vec<f64>>,
    /// Phase point q1..qn,p1..pn.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub seed_point: Option<Vec<f64>>,
    /// Grid cells per axis: one value for all axes or one per axis.
    #[arg(long, value_delimiter = ',')]
    pub resolution: Option<Vec<usize>>,
    #[arg(long)]
    pub atol: Option<f64>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub budget: Option<usize>,
    /// Image lattice, e.g. `0:2:20` or `0:2:8,0:2:8` or `0.5;1.5`.
    #[arg(long, allow_hyphen_values = true)]
    pub lattice: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory for the report and tables.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// What goes to stdout: the JSON report or the main table.
    #[arg(long, value_enum, default_value_t)]
    pub format: Format,
    #[arg(long, value_enum, default_value_t)]
    pub connectivity: ConnectivityArg,
    /// Random points for rank statistics.
    #[arg(long)]
    pub samples: Option<usize>,
    /// Random points for bracket and symplectic tests.
    #[arg(long)]
    pub count: Option<usize>,
    /// Integral (1-based) whose flow `orbit --time` follows.
    #[arg(long)]
    pub field: Option<usize>,
    /// Flow time for `orbit`; negative flows backward.
    #[arg(long, allow_hyphen_values = true)]
    pub time: Option<f64>,
    /// RK4 step.
    #[arg(long)]
    pub step: Option<f64>,
    /// Map components for `sympeq`, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub map: Option<Vec<String>>,
}
