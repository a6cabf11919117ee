use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "gridloss", version, about = "Expected transport losses and optimal load-sharing controls")]
pub struct Cli {
    /// Worker threads for simulation and enumeration. Output does not depend
    /// on this value.
    #[arg(long, global = true, env = "GRIDLOSS_THREADS", value_parser = clap::value_parser!(usize))]
    pub threads: Option<usize>,

    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Args)]
pub struct GraphArg {
    /// Graph file: {"index_base": 0|1, "n": N, "edges": [[u, v, w], ...]}.
    #[arg(long)]
    pub graph: PathBuf,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    #[command(flatten)]
    pub graph: GraphArg,

    /// Covariance file: {"iid": {"variance": x}} or {"matrix": [[...], ...]}.
    #[arg(long)]
    pub cov: PathBuf,
}

#[derive(Debug, Args)]
pub struct ProfileArg {
    /// Nominal load profile file {"mu": [...]}; zero when omitted.
    #[arg(long)]
    pub mu: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ControlArgs {
    /// Equal sharing over these nodes (comma list, in the graph file's
    /// index base).
    #[arg(long, value_delimiter = ',', conflicts_with = "alpha")]
    pub nodes: Option<Vec<usize>>,

    /// Explicit load-sharing coefficients, one per node, summing to 1.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub alpha: Option<Vec<f64>>,
}

/// Inclusive range of controllable counts, written `a..b` or `k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KRange {
    pub start: usize,
    pub end: usize,
}

pub fn parse_k_range(s: &str) -> Result<KRange, String> {
    let parse = |x: &str| x.trim().parse::<usize>().map_err(|e| format!("invalid count {x:?}: {e}"));
    let (start, end) = match s.split_once("..") {
        Some((a, b)) => (parse(a)?, parse(b.trim_start_matches('='))?),
        None => {
            let k = parse(s)?;
            (k, k)
        }
    };
    if start == 0 || end < start {
        return Err(format!("empty or invalid range {s:?}"));
    }
    Ok(KRange { start, end })
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Laplacian pseudoinverse and spectrum.
    Pseudoinverse {
        #[command(flatten)]
        graph: GraphArg,
    },
    /// Effective resistance of a pair, or all pairs and the total.
    Resistance {
        #[command(flatten)]
        graph: GraphArg,
        #[arg(long, num_args = 2, value_names = ["I", "J"])]
        pair: Option<Vec<usize>>,
    },
    /// Expected loss of a given control, split into stochastic and
    /// deterministic parts. Uses uniform sharing when no control is given.
    ExpectedLoss {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        profile: ProfileArg,
        #[command(flatten)]
        control: ControlArgs,
    },
    /// Optimal load-sharing over the given controllable nodes (all nodes
    /// when omitted), optionally with a usage penalty.
    Optimize {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, value_delimiter = ',')]
        nodes: Option<Vec<usize>>,
        /// Penalty file {"p_diag": [...], "q": [...]}.
        #[arg(long, requires = "xi")]
        penalty: Option<PathBuf>,
        /// Penalty weight.
        #[arg(long, requires = "penalty")]
        xi: Option<f64>,
    },
    /// Expected loss averaged over equal-share placements of k controllables.
    AverageK {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, value_parser = parse_k_range, default_value = "1")]
        k: KRange,
        /// Skip the brute-force enumeration.
        #[arg(long)]
        no_enumeration: bool,
    },
    /// Ratios H_k / H_1 and the asymptotic constant.
    ScalingCurve {
        #[command(flatten)]
        model: ModelArgs,
        /// Largest k (defaults to n).
        #[arg(long)]
        k_max: Option<usize>,
    },
    /// Monte Carlo estimate of the expected loss of a control.
    Simulate {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        profile: ProfileArg,
        #[command(flatten)]
        control: ControlArgs,
        #[arg(long, default_value_t = 100_000)]
        samples: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Pseudoinverse after adding weight beta to edge (I, J).
    PerturbEdge {
        #[command(flatten)]
        graph: GraphArg,
        #[arg(long, num_args = 2, value_names = ["I", "J"], required = true)]
        edge: Vec<usize>,
        #[arg(long)]
        beta: f64,
    },
}
