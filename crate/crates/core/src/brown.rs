//! Hitting time from stationarity as a geometric number of iid copies of `V`,
//! through the upward ladder dual. Reversibility is not required; the
//! hypothesis is that `P^t(0,0)` is nonincreasing.
//!
//! Deviations `D_t = P^t(0,:) - pi` are propagated directly (`D_t = D_{t-1} P`)
//! and renormalised each step, so ratios such as `q_i` stay accurate long
//! after `P^t(0,0) - pi(0)` has dropped below machine precision.

use nalgebra::{DMatrix, RowDVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::intertwining::{certify_rows, IntertwiningCertificate, QuasiLink, Side};
use crate::markov::{hitting_time_cdf, make_absorbing, stationary_distribution, HittingCdf, ProbabilityVector, StochasticMatrix};
use crate::tol;

/// `P(V > t)` for `t = 0..=horizon`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VDistribution {
    pub tail: Vec<f64>,
}

impl VDistribution {
    pub fn new(tail: Vec<f64>) -> Result<Self> {
        let v = VDistribution { tail };
        v.validate()?;
        Ok(v)
    }

    fn validate(&self) -> Result<()> {
        match self.tail.first() {
            Some(t0) if (t0 - 1.0).abs() <= tol::ALGEBRAIC => {}
            _ => return Err(Error::InvalidTail { t: 0 }),
        }
        for (t, w) in self.tail.windows(2).enumerate() {
            if w[1] > w[0] + tol::MONOTONE_SLACK || w[1] < -tol::MONOTONE_SLACK {
                return Err(Error::InvalidTail { t: t + 1 });
            }
        }
        Ok(())
    }

    /// `P(V = t) = tail[t-1] - tail[t]` for `t >= 1`; `V >= 1`.
    pub fn pmf(&self) -> Vec<f64> {
        let mut pmf = vec![0.0; self.tail.len()];
        for t in 1..self.tail.len() {
            pmf[t] = (self.tail[t - 1] - self.tail[t]).max(0.0);
        }
        pmf
    }

    /// The separation distance `s(t)` of the chain started from `mu_1`.
    pub fn separation(&self, t: usize) -> f64 {
        self.tail[t]
    }

    pub fn horizon(&self) -> usize {
        self.tail.len() - 1
    }
}

/// Normalised deviation iteration. `next()` yields `(D_t(0) / D_{t-1}(0), d_t)`
/// where `d_t` is `D_t` up to a positive factor, or `None` once `D_t(0)`
/// vanishes relative to the deviation.
struct Deviations<'a> {
    p: &'a DMatrix<f64>,
    pi: &'a ProbabilityVector,
    target: usize,
    d: RowDVector<f64>,
}

impl<'a> Deviations<'a> {
    fn new(p: &'a DMatrix<f64>, pi: &'a ProbabilityVector, target: usize) -> Self {
        let mut d = -pi.row().clone();
        d[target] += 1.0;
        Deviations { p, pi, target, d }
    }

    fn current(&self) -> &RowDVector<f64> {
        &self.d
    }

    /// Relative size of `d(target)`; `None` when the deviation has vanished.
    fn lead(&self) -> Option<f64> {
        let scale = self.d.amax();
        (scale > 0.0).then(|| self.d[self.target] / scale)
    }

    /// Advances one step; returns the contraction `D_t(0) / D_{t-1}(0)`.
    fn step(&mut self) -> f64 {
        let before = self.d[self.target];
        let mut next = &self.d * self.p;
        let drift = next.sum();
        next -= self.pi.row() * drift;
        let ratio = next[self.target] / before;
        let scale = next.amax();
        self.d = if scale > 0.0 { next / scale } else { next };
        ratio
    }
}

/// `mu_i`, `i = 1..=M`, and `q_i`, `i = 1..=M-1`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MuQSequence {
    pub mu: Vec<Vec<f64>>,
    pub q: Vec<f64>,
    pub all_nonneg: bool,
}

/// `mu_i(j) = pi(j) - pi(0) D(j) / D(0)` from a (scaled) deviation.
fn mu_from(d: &RowDVector<f64>, pi: &ProbabilityVector, target: usize) -> Vec<f64> {
    let lead = d[target];
    (0..pi.len()).map(|j| if j == target { 0.0 } else { pi[j] - pi[target] * d[j] / lead }).collect()
}

enum Ladder {
    /// Ran to the requested length.
    Full(MuQSequence),
    /// `P^{i-1}(0,0) = pi(0)` at the returned index `i`; the sequence holds
    /// `mu_1..mu_{i-1}` and `q_1..q_{i-1}` with `q_{i-1} = 1`.
    Degenerate(MuQSequence, usize),
}

fn ladder(p: &StochasticMatrix, pi: &ProbabilityVector, target: usize, m: usize) -> Result<Ladder> {
    p.check_index(target)?;
    if pi.len() != p.len() {
        return Err(Error::DimensionMismatch { context: "stationary law", expected: p.len(), found: pi.len() });
    }
    let mut dev = Deviations::new(p.matrix(), pi, target);
    let mut mu = Vec::with_capacity(m);
    let mut q = Vec::with_capacity(m);
    for i in 1..=m {
        // mu_i is built from D_{i-1}
        match dev.lead() {
            Some(lead) if lead > tol::DEGENERATE => {}
            _ => {
                if let Some(last) = q.last_mut() {
                    *last = 1.0;
                }
                let all_nonneg = nonneg(&mu);
                return Ok(Ladder::Degenerate(MuQSequence { mu, q, all_nonneg }, i));
            }
        }
        mu.push(mu_from(dev.current(), pi, target));
        if i < m {
            let contraction = dev.step();
            q.push(if contraction <= tol::DEGENERATE { 1.0 } else { 1.0 - contraction });
        }
    }
    let all_nonneg = nonneg(&mu);
    Ok(Ladder::Full(MuQSequence { mu, q, all_nonneg }))
}

fn nonneg(mu: &[Vec<f64>]) -> bool {
    mu.iter().flatten().all(|v| *v >= -1e-12)
}

/// The rows `mu_1..mu_M` and `q_1..q_{M-1}`; fails with the first index at
/// which `P^{i-1}(0,0) = pi(0)` (relative to the size of the deviation).
pub fn mu_q_sequence(p: &StochasticMatrix, pi: &ProbabilityVector, target: usize, m: usize) -> Result<MuQSequence> {
    match ladder(p, pi, target, m)? {
        Ladder::Full(seq) => Ok(seq),
        Ladder::Degenerate(_, index) => Err(Error::DegenerateDenominator { index }),
    }
}

/// `max_i || mu_i P - q_i pi - (1 - q_i) mu_{i+1} ||_inf` over consecutive pairs.
pub fn recursion_residual(p: &StochasticMatrix, pi: &ProbabilityVector, seq: &MuQSequence) -> f64 {
    let mut worst = 0.0_f64;
    for (i, &q) in seq.q.iter().enumerate() {
        let Some(next) = seq.mu.get(i + 1) else { break };
        let lhs = RowDVector::from_row_slice(&seq.mu[i]) * p.matrix();
        let rhs = pi.row() * q + RowDVector::from_row_slice(next) * (1.0 - q);
        worst = worst.max((lhs - rhs).amax());
    }
    worst
}

/// Outcome of the monotonicity hypothesis check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonotoneCheck {
    pub monotone: bool,
    pub first_violation: Option<usize>,
    /// `P^t(0,0)` for `t = 0..=horizon`.
    pub p00: Vec<f64>,
    /// `(P^t(0,0) - pi(0)) / (1 - pi(0))`; a valid law only when `monotone`.
    pub v: VDistribution,
}

/// Checks `pi(0) <= P^t(0,0) <= P^{t-1}(0,0)` for `t <= horizon` with slack `1e-12`.
pub fn check_p00_monotone(p: &StochasticMatrix, pi: &ProbabilityVector, target: usize, horizon: usize) -> Result<MonotoneCheck> {
    p.check_index(target)?;
    let m = p.matrix();
    let mut d = -pi.row().clone();
    d[target] += 1.0;
    let base = pi[target];
    let mut p00 = vec![1.0];
    let mut tail = vec![1.0];
    let mut first_violation = None;
    for t in 1..=horizon {
        let mut next = &d * m;
        let drift = next.sum();
        next -= pi.row() * drift;
        d = next;
        let now = base + d[target];
        if first_violation.is_none() && (now > p00[t - 1] + tol::MONOTONE_SLACK || now < base - tol::MONOTONE_SLACK) {
            first_violation = Some(t);
        }
        p00.push(now);
        tail.push(d[target] / (1.0 - base));
    }
    Ok(MonotoneCheck { monotone: first_violation.is_none(), first_violation, p00, v: VDistribution { tail } })
}

/// As [`check_p00_monotone`], failing on the first violation.
pub fn require_p00_monotone(p: &StochasticMatrix, pi: &ProbabilityVector, target: usize, horizon: usize) -> Result<VDistribution> {
    let check = check_p00_monotone(p, pi, target, horizon)?;
    match check.first_violation {
        Some(t) => Err(Error::MonotonicityViolated { t }),
        None => Ok(check.v),
    }
}

/// Upward ladder on `0..=M` started from `pi(0) delta_0 + (1 - pi(0)) delta_1`.
#[derive(Debug, Clone, Serialize)]
pub struct LadderDual {
    pub pi_hat0: ProbabilityVector,
    pub p_hat: StochasticMatrix,
    /// `q_1..q_M`.
    pub q: Vec<f64>,
    /// `M`; row `M` is made sticky unless the ladder closed exactly below it.
    pub truncation: usize,
    /// Rows `0..certified_rows` satisfy the intertwining exactly.
    pub certified_rows: usize,
    /// The ladder closed because `P^{i}(0,0) = pi(0)` was reached.
    pub closed: bool,
}

impl LadderDual {
    /// `P(T^_0 <= t)` from `pi_hat0`, using the three-entry rows of the ladder.
    pub fn hitting_cdf(&self, horizon: usize) -> HittingCdf {
        let m = self.truncation;
        let base = self.pi_hat0[0];
        let mut dist = self.pi_hat0.to_vec();
        let mut values = Vec::with_capacity(horizon + 1);
        values.push(dist[0]);
        for _ in 0..horizon {
            let mut next = vec![0.0; m + 1];
            next[0] = dist[0];
            for i in 1..=m {
                let (mass, q) = (dist[i], self.q[i - 1]);
                next[0] += mass * base * q;
                next[1] += mass * (1.0 - base) * q;
                next[if i < m { i + 1 } else { i }] += mass * (1.0 - q);
            }
            dist = next;
            values.push(dist[0]);
        }
        HittingCdf::from_values(values)
    }
}

/// Builds the ladder truncated at `M = horizon + 1` (exact for hitting
/// probabilities up to `horizon`) together with the link with rows `delta_0, mu_1, ..., mu_M`.
pub fn build_ladder_dual(
    p: &StochasticMatrix,
    pi: &ProbabilityVector,
    target: usize,
    horizon: usize,
) -> Result<(LadderDual, QuasiLink)> {
    require_p00_monotone(p, pi, target, horizon + 1)?;
    let m_req = horizon + 1;
    let (seq, closed) = match ladder(p, pi, target, m_req + 1)? {
        Ladder::Full(seq) => (seq, false),
        Ladder::Degenerate(seq, _) => (seq, true),
    };
    let big_m = seq.mu.len().min(m_req).max(1);
    let q: Vec<f64> = (0..big_m).map(|i| seq.q.get(i).copied().unwrap_or(1.0)).collect();
    let base = pi[target];
    let mut ph = DMatrix::zeros(big_m + 1, big_m + 1);
    ph[(0, 0)] = 1.0;
    for i in 1..=big_m {
        let qi = q[i - 1];
        ph[(i, 0)] += base * qi;
        ph[(i, 1)] += (1.0 - base) * qi;
        let up = if i < big_m { i + 1 } else { i };
        ph[(i, up)] += 1.0 - qi;
    }
    let n = p.len();
    let mut link = DMatrix::zeros(big_m + 1, n);
    link[(0, target)] = 1.0;
    for i in 1..=big_m {
        for j in 0..n {
            link[(i, j)] = seq.mu[i - 1][j];
        }
    }
    let mut init = vec![0.0; big_m + 1];
    init[0] = base;
    init[1] = 1.0 - base;
    let exact_top = closed && q[big_m - 1] == 1.0;
    let dual = LadderDual {
        pi_hat0: ProbabilityVector::new(init)?,
        p_hat: StochasticMatrix::from_matrix(ph)?,
        q,
        truncation: big_m,
        certified_rows: if exact_top { big_m + 1 } else { big_m },
        closed,
    };
    Ok((dual, QuasiLink::new(link)?))
}

/// Certifies the truncated ladder link on its certified rows.
pub fn certify_ladder(
    p: &StochasticMatrix,
    pi: &ProbabilityVector,
    target: usize,
    dual: &LadderDual,
    link: &QuasiLink,
) -> Result<IntertwiningCertificate> {
    let p_abs = make_absorbing(p, target)?;
    certify_rows(
        link,
        Side::new(pi, &p_abs, target),
        Side::new(&dual.pi_hat0, &dual.p_hat, 0),
        0..dual.certified_rows,
    )
}

/// Law of `sum_{i=1}^N V_i` with `P(N = k) = pi(0) (1 - pi(0))^k`, on `0..=horizon`.
pub fn compound_geometric_cdf(pi0_mass: f64, v: &VDistribution, horizon: usize) -> Result<HittingCdf> {
    v.validate()?;
    if v.horizon() < horizon {
        return Err(Error::InvalidTail { t: v.horizon() + 1 });
    }
    let f = v.pmf();
    let mut g = vec![0.0; horizon + 1];
    g[0] = pi0_mass;
    for t in 1..=horizon {
        let conv: f64 = (1..=t).map(|s| f[s] * g[t - s]).sum();
        g[t] = (1.0 - pi0_mass) * conv;
    }
    Ok(HittingCdf::from_pmf(&g))
}

/// First pair `(t, i)` at which the reversed kernel gives `P~^t(i,0) > P~^t(0,0)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinkWitness {
    pub t: usize,
    pub state: usize,
    /// `P~^t(i,0) - P~^t(0,0)`.
    pub excess: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinkCondition {
    pub holds: bool,
    pub witness: Option<LinkWitness>,
    /// Whether the supplied order makes the target extreme and `P~` stochastically monotone.
    pub monotone_order: Option<bool>,
}

/// Checks `P~^t(i,0) <= P~^t(0,0)` for all `i` and `t <= horizon`; equivalently
/// `mu_{t+1} >= 0` (tolerance `1e-10`, relative to `P^t(0,0) - pi(0)`).
pub fn check_v_link_condition(
    p: &StochasticMatrix,
    pi: &ProbabilityVector,
    target: usize,
    horizon: usize,
    order: Option<&[usize]>,
) -> Result<LinkCondition> {
    p.check_index(target)?;
    let mut dev = Deviations::new(p.matrix(), pi, target);
    let mut unscaled = -pi.row().clone();
    unscaled[target] += 1.0;
    let mut witness = None;
    'time: for t in 0..=horizon {
        if t > 0 {
            dev.step();
            unscaled = &unscaled * p.matrix();
        }
        let d = dev.current();
        let lead = dev.lead();
        for i in (0..p.len()).filter(|&i| i != target) {
            let excess = pi[target] * unscaled[i] / pi[i] - unscaled[target];
            let violated = match lead {
                Some(l) if l > tol::DEGENERATE => pi[i] - pi[target] * d[i] / d[target] < -tol::ALGEBRAIC,
                _ => excess > tol::MONOTONE_SLACK,
            };
            if violated {
                witness = Some(LinkWitness { t, state: i, excess });
                break 'time;
            }
        }
    }
    let monotone_order = order.map(|o| stochastically_monotone(&reversed(p, pi), o, target)).transpose()?;
    Ok(LinkCondition { holds: witness.is_none(), witness, monotone_order })
}

fn reversed(p: &StochasticMatrix, pi: &ProbabilityVector) -> DMatrix<f64> {
    let m = p.matrix();
    DMatrix::from_fn(p.len(), p.len(), |i, j| pi[j] * m[(j, i)] / pi[i])
}

/// `order` lists the states from bottom to top. True when the target is the
/// bottom or top element and upper-set probabilities of `k` increase along the order.
fn stochastically_monotone(k: &DMatrix<f64>, order: &[usize], target: usize) -> Result<bool> {
    let n = k.nrows();
    let mut seen = vec![false; n];
    if order.len() != n || order.iter().any(|&s| s >= n || std::mem::replace(&mut seen[s], true)) {
        return Err(Error::InvalidDistribution("order must be a permutation of the states".into()));
    }
    if order[0] != target && order[n - 1] != target {
        return Ok(false);
    }
    for w in 1..n {
        let upper = |x: usize| order[w..].iter().map(|&z| k[(x, z)]).sum::<f64>();
        for pair in order.windows(2) {
            if upper(pair[0]) > upper(pair[1]) + tol::ALGEBRAIC {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// All diagnostics of the compound-geometric representation for one chain.
#[derive(Debug, Clone, Serialize)]
pub struct VAnalysis {
    pub monotone: bool,
    pub first_violation: Option<usize>,
    pub horizon: usize,
    pub v_tail: Vec<f64>,
    pub q: Vec<f64>,
    pub lambda_is_stochastic: Option<bool>,
    pub link_condition: LinkCondition,
    pub certificate: Option<IntertwiningCertificate>,
    /// `max |compound - exact|` and `max |ladder dual - exact|` over the horizon.
    pub cdf_max_discrepancy: Option<f64>,
    pub recursion_residual: Option<f64>,
    pub ladder_closed: Option<bool>,
}

/// Runs the monotonicity check and, when it holds, the ladder, link
/// certificate and the three-way CDF comparison.
pub fn analyze_v(p: &StochasticMatrix, target: usize, horizon: usize, order: Option<&[usize]>) -> Result<VAnalysis> {
    let pi = stationary_distribution(p)?;
    let check = check_p00_monotone(p, &pi, target, horizon + 1)?;
    let link_condition = check_v_link_condition(p, &pi, target, horizon, order)?;
    let mut out = VAnalysis {
        monotone: check.monotone,
        first_violation: check.first_violation,
        horizon,
        v_tail: check.v.tail[..=horizon].to_vec(),
        q: Vec::new(),
        lambda_is_stochastic: None,
        link_condition,
        certificate: None,
        cdf_max_discrepancy: None,
        recursion_residual: None,
        ladder_closed: None,
    };
    if !check.monotone {
        return Ok(out);
    }
    let (dual, link) = build_ladder_dual(p, &pi, target, horizon)?;
    let p_abs = make_absorbing(p, target)?;
    let exact = hitting_time_cdf(&pi, &p_abs, target, horizon)?;
    let v = VDistribution::new(out.v_tail.clone())?;
    let compound = compound_geometric_cdf(pi[target], &v, horizon)?;
    let ladder_cdf = dual.hitting_cdf(horizon);
    out.cdf_max_discrepancy = Some(exact.max_discrepancy(&compound).max(exact.max_discrepancy(&ladder_cdf)));
    let seq = match ladder(p, &pi, target, horizon + 1)? {
        Ladder::Full(seq) | Ladder::Degenerate(seq, _) => seq,
    };
    out.recursion_residual = Some(recursion_residual(p, &pi, &seq));
    out.certificate = Some(certify_ladder(p, &pi, target, &dual, &link)?);
    out.lambda_is_stochastic = Some(link.is_stochastic());
    out.ladder_closed = Some(dual.closed);
    out.q = dual.q;
    Ok(out)
}
