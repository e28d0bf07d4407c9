//! One runner per subcommand. Each returns the payload and its verdicts.

use hitlace::block::{block_link, fit_block_dual, lift_initial, BlockStructure};
use hitlace::brown::analyze_v;
use hitlace::intertwining::{certify, simulate_linked, IntertwiningCertificate, LinkSimConfig, Side};
use hitlace::markov::{check_reversible, hitting_time_cdf, make_absorbing, stationary_distribution, ProbabilityVector};
use hitlace::moran::{geometric_decomposition_check, moran_certificate, moran_dual, moran_lambda, moran_moments};
use hitlace::star::{decompose, DecomposeOptions, TRANSFORM_POINTS};
use hitlace::Error;
use num::ToPrimitive;
use serde_json::{json, Value};

use crate::input::{resolve_state, Chain};
use crate::report::Verdict;

/// Tolerances shared by all commands.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Exact-arithmetic style identities: absorption columns, tails.
    pub algebraic: f64,
    /// Anything passing through an eigen-decomposition or long propagation.
    pub spectral: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { algebraic: 1e-10, spectral: 1e-8 }
    }
}

pub type Outcome = Result<(Value, Vec<Verdict>), Error>;

fn to_value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("payload serializes")
}

fn certificate_verdict(name: &'static str, cert: &IntertwiningCertificate, tol: &Tolerances) -> Vec<Verdict> {
    vec![
        Verdict::at_most(3, name, cert.residual_semigroup.max(cert.residual_initial), tol.spectral),
        Verdict::at_most(3, "absorption_column", cert.residual_absorption, tol.algebraic),
    ]
}

fn target_of(chain: &Chain, flag: Option<&str>) -> Result<usize, Error> {
    match flag.or(chain.target.as_deref()) {
        Some(key) => resolve_state(&chain.p, key),
        None => Ok(0),
    }
}

pub fn validate(chain: &Chain) -> Outcome {
    let p = &chain.p;
    let irreducible = p.is_irreducible();
    let mut payload = json!({
        "states": p.len(),
        "labels": p.labels(),
        "irreducible": irreducible,
        "period": p.period(),
        "max_row_sum_error": p.max_row_sum_error(),
    });
    if irreducible {
        let pi = stationary_distribution(p)?;
        let rev = check_reversible(p, &pi)?;
        payload["stationary"] = to_value(&pi);
        payload["reversible"] = json!(rev.reversible);
        payload["detailed_balance_residual"] = json!(rev.residual);
    }
    Ok((payload, Vec::new()))
}

pub fn decompose_cmd(chain: &Chain, target: Option<&str>, horizon: usize, tol: &Tolerances) -> Result<(Value, Vec<Verdict>, String), Error> {
    let t = target_of(chain, target)?;
    let d = decompose(&chain.p, t, &DecomposeOptions::default())?;
    let table = d.cdf_table(horizon)?;
    let cdf = table.max_discrepancy();
    let tail = d.stationary_tail_residual(horizon);
    let transform = d.transform_check(horizon, &TRANSFORM_POINTS)?;
    let payload = json!({
        "target": d.labels[t],
        "shift_applied": d.shift_applied,
        "lambdas": d.spectra.lambdas,
        "gammas": d.spectra.gammas,
        "rho": d.rho,
        "pi_star": d.star.pi_star,
        "P_star": d.star.p_star,
        "pi_hat": d.dual.pi_hat,
        "P_hat": d.dual.p_hat,
        "lambda1": d.lambda1,
        "lambda2": d.lambda2,
        "lambda": d.lambda,
        "certificates": d.certificates,
        "diagnostics": d.diagnostics,
        "cdf_max_discrepancy": cdf,
        "stationary_tail_residual": tail,
        "transform_identity": transform,
        "mean": d.mean(),
        "lambda_is_stochastic": d.lambda_is_stochastic(),
        "warnings": d.warnings,
    });
    let mut verdicts = vec![Verdict::at_most(2, "cdf_equivalence", cdf, tol.spectral)];
    let c = &d.certificates;
    verdicts.extend(certificate_verdict("lambda2_certificate", &c.lambda2, tol));
    verdicts.extend(certificate_verdict("lambda1_certificate", &c.lambda1, tol));
    verdicts.extend(certificate_verdict("lambda_certificate", &c.lambda, tol));
    verdicts.push(Verdict::at_most(7, "stationary_tail", tail, tol.algebraic));
    Ok((payload, verdicts, table.to_csv()))
}

pub fn brown_v(chain: &Chain, target: Option<&str>, horizon: usize, order: Option<&[String]>, tol: &Tolerances) -> Outcome {
    let t = target_of(chain, target)?;
    let order: Option<Vec<usize>> =
        order.map(|o| o.iter().map(|s| resolve_state(&chain.p, s)).collect::<Result<_, _>>()).transpose()?;
    let a = analyze_v(&chain.p, t, horizon, order.as_deref())?;
    if let Some(t) = a.first_violation {
        return Err(Error::MonotonicityViolated { t });
    }
    let mut verdicts = vec![
        Verdict::at_most(5, "compound_geometric_equivalence", a.cdf_max_discrepancy.unwrap_or(f64::INFINITY), tol.spectral.min(1e-9)),
        Verdict::at_most(5, "ladder_recursion", a.recursion_residual.unwrap_or(f64::INFINITY), tol.algebraic),
    ];
    if let Some(cert) = &a.certificate {
        verdicts.extend(certificate_verdict("ladder_certificate", cert, tol));
    }
    Ok((to_value(&a), verdicts))
}

/// Extra steps needed for the dual CDF to carry all but `1e-15` of its mass.
fn moment_horizon(n: usize, horizon: usize) -> usize {
    let slowest = moran_lambda(n, 2).to_f64().unwrap_or(0.0);
    let needed = if slowest > 0.0 { (36.0 * (n as f64).ln().max(1.0) / -slowest.ln()).ceil() as usize } else { 0 };
    horizon.max(needed)
}

pub fn moran(n: usize, horizon: usize, tol: &Tolerances) -> Outcome {
    let m = moran_moments(n)?;
    let cert = moran_certificate(n)?;
    let cdf = geometric_decomposition_check(n, horizon)?;
    // the dual birth chain carries the same absorption law on n states
    let dual = moran_dual(n)?;
    let (mean_cdf, var_cdf) =
        hitting_time_cdf(&ProbabilityVector::point_mass(n, 0), &dual.p_hat, n - 1, moment_horizon(n, horizon))?.moments();
    let exact_mean = (n - 1) * (n - 1);
    let mean_ok = m.mean_exact == num::BigRational::from_integer(exact_mean.into());
    let payload = json!({
        "n": n,
        "mean": m.mean,
        "variance": m.variance,
        "mean_exact": m.mean_exact.to_string(),
        "variance_exact": m.variance_exact.to_string(),
        "dual_cdf_mean": mean_cdf,
        "dual_cdf_variance": var_cdf,
        "max_cdf_discrepancy": cdf,
        "certify_residuals": cert,
    });
    let mut verdicts = vec![
        Verdict::at_most(4, "mean_closed_form", if mean_ok { 0.0 } else { 1.0 }, 0.0),
        Verdict::at_most(4, "cdf_mean", (mean_cdf - m.mean).abs() / m.mean.max(1.0), 1e-6),
        Verdict::at_most(4, "cdf_variance", (var_cdf - m.variance).abs() / m.variance.max(1.0), 1e-6),
        Verdict::at_most(4, "geometric_decomposition", cdf, tol.spectral),
    ];
    verdicts.extend(certificate_verdict("moran_certificate", &cert, tol));
    Ok((payload, verdicts))
}

pub fn block(chain: &Chain, blocks: &BlockStructure, target: Option<&str>, tol: &Tolerances) -> Outcome {
    let p = &chain.p;
    let dual = fit_block_dual(p, blocks)?;
    let link = block_link(blocks, &dual.mu)?;
    let t = match target.or(chain.target.as_deref()) {
        Some(key) => resolve_state(p, key)?,
        None => p.len() - 1,
    };
    let dual_target = blocks.block_of()[t];
    let k = blocks.num_blocks();
    // dual starts from the block masses of pi0, or from block 0
    let dual_init = match &chain.pi0 {
        Some(v) => {
            let mut w = vec![0.0; k];
            for (s, &b) in blocks.block_of().iter().enumerate() {
                w[b] += v[s];
            }
            ProbabilityVector::new(w)?
        }
        None => ProbabilityVector::point_mass(k, 0),
    };
    let init = match &chain.pi0 {
        Some(v) => v.clone(),
        None => lift_initial(blocks, &dual.mu, &dual_init)?,
    };
    let p_abs = make_absorbing(p, t)?;
    let p_hat_abs = make_absorbing(&dual.p_hat, dual_target)?;
    let cert = certify(&link, Side::new(&init, &p_abs, t), Side::new(&dual_init, &p_hat_abs, dual_target))?;
    let payload = json!({
        "target": p.labels()[t],
        "dual": dual,
        "link": link,
        "certificate": cert,
    });
    let mut verdicts = vec![Verdict::at_most(3, "proportionality", dual.residual, 1e-9)];
    verdicts.extend(certificate_verdict("block_certificate", &cert, tol));
    Ok((payload, verdicts))
}

/// Settings specific to `link-sim`.
#[derive(Debug, Clone)]
pub struct SimSettings {
    pub paths: usize,
    pub workers: usize,
    pub checkpoints: Vec<usize>,
    pub seed: u64,
}

pub fn link_sim(chain: &Chain, target: Option<&str>, horizon: usize, sim: &SimSettings) -> Outcome {
    let t = target_of(chain, target)?;
    let d = decompose(&chain.p, t, &DecomposeOptions::default())?;
    if !d.lambda_is_stochastic() {
        return Err(Error::NotStochasticLink);
    }
    let config = LinkSimConfig {
        paths: sim.paths,
        max_length: horizon,
        checkpoints: sim.checkpoints.clone(),
        seed: sim.seed,
        workers: sim.workers,
    };
    let stats = simulate_linked(
        &d.lambda,
        Side::new(&d.pi, &d.p_abs, t),
        Side::new(&d.dual.pi_hat, &d.dual.p_hat, 0),
        &config,
    )?;
    let (cells, rows) = stats.conditional_cells(&d.lambda, 3.0, 30);
    let within = cells.iter().filter(|c| c.within).count();
    let fraction = if cells.is_empty() { 1.0 } else { within as f64 / cells.len() as f64 };
    let payload = json!({
        "paths": stats.paths,
        "absorption_agreements": stats.absorption_agreements,
        "checkpoints": stats.checkpoints,
        "cells": cells.len(),
        "cells_within_3se": within,
        "chi_square": rows,
    });
    let verdicts = vec![
        Verdict::at_least(6, "absorption_agreement", stats.absorption_agreements as f64, stats.paths as f64),
        Verdict::at_least(6, "conditional_law_cells", fraction, 0.99),
    ];
    Ok((payload, verdicts))
}
