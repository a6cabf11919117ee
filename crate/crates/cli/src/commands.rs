use std::path::Path;

use gridloss::io::{matrix_rows, read_covariance, read_graph, read_load_profile, read_penalty};
use gridloss::placement::average_loss_k_with_cap;
use gridloss::{
    build_laplacian, effective_resistance, estimate_expected_loss, expected_loss, optimize_full,
    optimize_penalized, optimize_subset, perturb_edge, scaling_curve, total_effective_resistance,
    ControlVector, ControllableSet, CovarianceModel, EdgePerturbation, LaplacianPair, LoadProfile,
};
use nalgebra::DVector;
use serde::Serialize;

use crate::args::{Cli, Command, ControlArgs, GraphArg, ModelArgs, ProfileArg};
use crate::output::{emit, num, opt_num, Table};
use crate::Failure;

/// A loaded graph with the index base of its file.
struct Network {
    lp: LaplacianPair,
    base: usize,
}

impl Network {
    fn load(arg: &GraphArg) -> Result<Self, Failure> {
        let (graph, base) = read_graph(&arg.graph)?;
        Ok(Self { lp: build_laplacian(&graph)?, base })
    }

    fn n(&self) -> usize {
        self.lp.n()
    }

    /// Converts a node label from the file's index base to a 0-based index.
    fn index(&self, label: usize) -> Result<usize, Failure> {
        label
            .checked_sub(self.base)
            .filter(|&i| i < self.n())
            .ok_or_else(|| {
                Failure::Usage(format!(
                    "node {label} is not in {}..={}",
                    self.base,
                    self.n() + self.base - 1
                ))
            })
    }

    fn indices(&self, labels: &[usize]) -> Result<Vec<usize>, Failure> {
        labels.iter().map(|&l| self.index(l)).collect()
    }

    fn label(&self, index: usize) -> usize {
        index + self.base
    }
}

fn load_model(args: &ModelArgs) -> Result<(Network, CovarianceModel), Failure> {
    let net = Network::load(&args.graph)?;
    let cov = read_covariance(&args.cov, net.n())?;
    Ok((net, cov))
}

fn load_profile(arg: &ProfileArg, n: usize) -> Result<LoadProfile, Failure> {
    match &arg.mu {
        Some(path) => Ok(read_load_profile(path, n)?),
        None => Ok(LoadProfile::zeros(n)),
    }
}

fn control(net: &Network, args: &ControlArgs) -> Result<ControlVector, Failure> {
    let n = net.n();
    if let Some(labels) = &args.nodes {
        if labels.is_empty() {
            return Err(Failure::Usage("--nodes needs at least one node".into()));
        }
        return Ok(ControlVector::equal_share(n, &net.indices(labels)?)?);
    }
    if let Some(alpha) = &args.alpha {
        if alpha.len() != n {
            return Err(Failure::Usage(format!("--alpha has {} entries for {n} nodes", alpha.len())));
        }
        return ControlVector::from_dense(DVector::from_column_slice(alpha))
            .map_err(|e| Failure::Usage(e.to_string()));
    }
    Ok(ControlVector::uniform(n))
}

pub fn run(cli: &Cli) -> Result<(), Failure> {
    let format = cli.format;
    match &cli.command {
        Command::Pseudoinverse { graph } => pseudoinverse(format, graph),
        Command::Resistance { graph, pair } => resistance(format, graph, pair.as_deref()),
        Command::ExpectedLoss { model, profile, control } => expected(format, model, profile, control),
        Command::Optimize { model, nodes, penalty, xi } => {
            optimize(format, model, nodes.as_deref(), penalty.as_deref(), *xi)
        }
        Command::AverageK { model, k, no_enumeration } => {
            let (net, cov) = load_model(model)?;
            if k.end > net.n() {
                return Err(Failure::Usage(format!("k = {} exceeds n = {}", k.end, net.n())));
            }
            let cap = if *no_enumeration { 0.0 } else { gridloss::placement::ENUMERATION_CAP };
            let rows = (k.start..=k.end)
                .map(|k| average_loss_k_with_cap(&net.lp, &cov, k, cap))
                .collect::<gridloss::Result<Vec<_>>>()?;
            emit(format, &rows, || {
                let mut t = Table::new(vec!["k", "closed_form", "enumerated"]);
                for r in &rows {
                    t.push(vec![r.k.to_string(), num(r.closed_form), opt_num(r.enumerated)]);
                }
                t
            })
        }
        Command::ScalingCurve { model, k_max } => {
            let (net, cov) = load_model(model)?;
            let k_max = k_max.unwrap_or(net.n());
            if k_max == 0 || k_max > net.n() {
                return Err(Failure::Usage(format!("--k-max must be in 1..={}", net.n())));
            }
            scaling(format, &scaling_curve(&net.lp, &cov, k_max)?)
        }
        Command::Simulate { model, profile, control: ctl, samples, seed } => {
            if *samples < 2 {
                return Err(Failure::Usage("--samples must be at least 2".into()));
            }
            let (net, cov) = load_model(model)?;
            let mu = load_profile(profile, net.n())?;
            let alpha = control(&net, ctl)?;
            let est = estimate_expected_loss(&net.lp, &cov, &mu, &alpha, *seed, *samples)?;
            emit(format, &est, || {
                let mut t = Table::new(vec!["mean", "std_error", "n_samples", "seed"]);
                t.push(vec![num(est.mean), num(est.std_error), est.n_samples.to_string(), est.seed.to_string()]);
                t
            })
        }
        Command::PerturbEdge { graph, edge, beta } => perturb(format, graph, edge, *beta),
    }
}

#[derive(Serialize)]
struct PseudoinverseReport {
    n: usize,
    index_base: usize,
    laplacian: Vec<Vec<f64>>,
    pseudoinverse: Vec<Vec<f64>>,
    eigenvalues: Vec<f64>,
    trace: f64,
    total_effective_resistance: f64,
}

fn matrix_table(net: &Network, columns: &[(&'static str, &nalgebra::DMatrix<f64>)]) -> Table {
    let mut header = vec!["i", "j"];
    header.extend(columns.iter().map(|c| c.0));
    let mut t = Table::new(header);
    for i in 0..net.n() {
        for j in 0..net.n() {
            let mut row = vec![net.label(i).to_string(), net.label(j).to_string()];
            row.extend(columns.iter().map(|c| num(c.1[(i, j)])));
            t.push(row);
        }
    }
    t
}

fn pseudoinverse(format: crate::args::Format, graph: &GraphArg) -> Result<(), Failure> {
    let net = Network::load(graph)?;
    let lp = &net.lp;
    let report = PseudoinverseReport {
        n: net.n(),
        index_base: net.base,
        laplacian: matrix_rows(lp.laplacian()),
        pseudoinverse: matrix_rows(lp.pseudoinverse()),
        eigenvalues: lp.spectrum().eigenvalues.iter().copied().collect(),
        trace: lp.trace_pseudoinverse(),
        total_effective_resistance: total_effective_resistance(lp),
    };
    emit(format, &report, || {
        matrix_table(&net, &[("laplacian", lp.laplacian()), ("pseudoinverse", lp.pseudoinverse())])
    })
}

#[derive(Serialize)]
struct PairResistance {
    i: usize,
    j: usize,
    resistance: f64,
}

#[derive(Serialize)]
struct AllResistances {
    total_effective_resistance: f64,
    pairs: Vec<PairResistance>,
}

fn resistance_table(pairs: &[PairResistance]) -> Table {
    let mut t = Table::new(vec!["i", "j", "resistance"]);
    for p in pairs {
        t.push(vec![p.i.to_string(), p.j.to_string(), num(p.resistance)]);
    }
    t
}

fn resistance(format: crate::args::Format, graph: &GraphArg, pair: Option<&[usize]>) -> Result<(), Failure> {
    let net = Network::load(graph)?;
    if let Some(pair) = pair {
        let (i, j) = (net.index(pair[0])?, net.index(pair[1])?);
        let report = PairResistance { i: pair[0], j: pair[1], resistance: effective_resistance(&net.lp, i, j)? };
        return emit(format, &report, || resistance_table(std::slice::from_ref(&report)));
    }
    let mut pairs = Vec::new();
    for i in 0..net.n() {
        for j in (i + 1)..net.n() {
            pairs.push(PairResistance {
                i: net.label(i),
                j: net.label(j),
                resistance: effective_resistance(&net.lp, i, j)?,
            });
        }
    }
    let report = AllResistances { total_effective_resistance: total_effective_resistance(&net.lp), pairs };
    emit(format, &report, || resistance_table(&report.pairs))
}

fn expected(
    format: crate::args::Format,
    model: &ModelArgs,
    profile: &ProfileArg,
    ctl: &ControlArgs,
) -> Result<(), Failure> {
    let (net, cov) = load_model(model)?;
    let mu = load_profile(profile, net.n())?;
    let alpha = control(&net, ctl)?;
    let report = expected_loss(&net.lp, &cov, &mu, &alpha)?;
    emit(format, &report, || {
        let mut t = Table::new(vec!["stochastic", "deterministic", "total"]);
        t.push(vec![
            num(report.expected_stochastic_loss),
            num(report.deterministic_loss),
            num(report.expected_total),
        ]);
        t
    })
}

#[derive(Serialize)]
struct OptimizeReport {
    nodes: Vec<usize>,
    alpha: Vec<f64>,
    gamma: f64,
    objective: f64,
    kkt_residual: f64,
}

fn optimize(
    format: crate::args::Format,
    model: &ModelArgs,
    nodes: Option<&[usize]>,
    penalty: Option<&Path>,
    xi: Option<f64>,
) -> Result<(), Failure> {
    let (net, cov) = load_model(model)?;
    let n = net.n();
    let set = match nodes {
        Some([]) => return Err(Failure::Usage("--nodes needs at least one node".into())),
        Some(labels) => {
            ControllableSet::new(n, net.indices(labels)?).map_err(|e| Failure::Usage(e.to_string()))?
        }
        None => ControllableSet::full(n),
    };
    let opt = match (penalty, xi) {
        (Some(path), Some(xi)) => {
            let pen = read_penalty(path, n, xi)?;
            optimize_penalized(&net.lp, &cov, &pen, &set)?
        }
        _ if set.is_full() => optimize_full(&net.lp, &cov)?,
        _ => optimize_subset(&net.lp, &cov, &set)?,
    };
    let report = OptimizeReport {
        nodes: set.nodes().iter().map(|&v| net.label(v)).collect(),
        alpha: opt.alpha_star.alpha().iter().copied().collect(),
        gamma: opt.lagrange_multiplier,
        objective: opt.objective_value,
        kkt_residual: opt.kkt_residual,
    };
    emit(format, &report, || {
        let mut t = Table::new(vec!["node", "alpha"]);
        for (i, a) in report.alpha.iter().enumerate() {
            t.push(vec![net.label(i).to_string(), num(*a)]);
        }
        t
    })
}

#[derive(Serialize)]
struct RatioRow {
    k: usize,
    ratio: f64,
}

#[derive(Serialize)]
struct ScalingReport {
    gamma: Option<f64>,
    /// `(a, b)` with limiting ratio `a + b / k`.
    asymptote: Option<(f64, f64)>,
    ratios: Vec<RatioRow>,
}

fn scaling(format: crate::args::Format, curve: &gridloss::ScalingCurve) -> Result<(), Failure> {
    let report = ScalingReport {
        gamma: curve.gamma,
        asymptote: curve.asymptote,
        ratios: curve.ratios.iter().map(|&(k, ratio)| RatioRow { k, ratio }).collect(),
    };
    emit(format, &report, || {
        let mut t = Table::new(vec!["k", "ratio"]);
        for r in &report.ratios {
            t.push(vec![r.k.to_string(), num(r.ratio)]);
        }
        t
    })
}

#[derive(Serialize)]
struct PerturbReport {
    edge: (usize, usize),
    beta: f64,
    pseudoinverse: Vec<Vec<f64>>,
    trace: f64,
    total_effective_resistance: f64,
}

fn perturb(format: crate::args::Format, graph: &GraphArg, edge: &[usize], beta: f64) -> Result<(), Failure> {
    let net = Network::load(graph)?;
    let (i, j) = (net.index(edge[0])?, net.index(edge[1])?);
    let pert = EdgePerturbation::new(i, j, beta).map_err(|e| Failure::Usage(e.to_string()))?;
    let updated = perturb_edge(&net.lp, &pert)?;
    let report = PerturbReport {
        edge: (edge[0], edge[1]),
        beta,
        pseudoinverse: matrix_rows(updated.pseudoinverse()),
        trace: updated.trace_pseudoinverse(),
        total_effective_resistance: total_effective_resistance(&updated),
    };
    emit(format, &report, || matrix_table(&net, &[("pseudoinverse", updated.pseudoinverse())]))
}
