//! One line per acceptance criterion; exits nonzero if any fails.

use std::time::{Duration, Instant};

use hitlace::block::{block_link, fit_block_dual, lift_initial};
use hitlace::brown::{analyze_v, build_ladder_dual, certify_ladder, check_p00_monotone};
use hitlace::fixtures;
use hitlace::generate::{conforming_block_chain, random_chain, random_reversible, random_star};
use hitlace::intertwining::{certify, simulate_linked, IntertwiningCertificate, LinkSimConfig, Side};
use hitlace::markov::{check_reversible, make_absorbing, stationary_distribution, ProbabilityVector, StochasticMatrix};
use hitlace::moran::{absorption_cdf, moran_certificate, moran_moments};
use hitlace::star::{collapse_star, collapse_star_exact, decompose, shift_chain, DecomposeOptions};
use num::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (u8, &'static str, fn() -> Outcome, Duration);

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn close(what: &str, got: f64, want: f64, tol: f64) -> Result<(), String> {
    ensure((got - want).abs() <= tol, || format!("{what}: got {got}, want {want} (tol {tol:e})"))
}

fn certified(what: &str, c: &IntertwiningCertificate) -> Result<f64, String> {
    ensure(c.residual_semigroup <= 1e-8 && c.residual_initial <= 1e-8, || format!("{what}: {c:?}"))?;
    ensure(c.residual_absorption <= 1e-10, || format!("{what}: absorption column {:e}", c.residual_absorption))?;
    Ok(c.max_residual())
}

fn options() -> DecomposeOptions {
    DecomposeOptions::default()
}

fn star_example_reproduction() -> Outcome {
    let d = decompose(&fixtures::six_state_star(), 0, &options()).map_err(|e| e.to_string())?;
    for (i, want) in [1.0, 0.8023, 0.7303, 0.1896].into_iter().enumerate() {
        close("lambda", d.spectra.lambdas[i], want, 5e-4)?;
    }
    let gammas = [5.0 / 6.0, 7.0 / 9.0, 2.0 / 3.0];
    let hub = [1.0 / 6.0, 2.0 / 9.0, 1.0 / 3.0];
    let pi_star = [6.0, 8.0, 3.0, 4.0].map(|x| x / 21.0);
    ensure(d.spectra.gammas.len() == 3, || format!("r = {}", d.r()))?;
    for i in 0..3 {
        close("gamma", d.spectra.gammas[i], gammas[i], 1e-9)?;
        close("hub probability", d.star.p_star.get(i + 1, 0), hub[i], 1e-9)?;
    }
    for i in 0..4 {
        close("pi*", d.star.pi_star[i], pi_star[i], 1e-9)?;
    }
    let displayed = [
        [1.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [0.0, 0.5, 0.5, 0.0, 0.0, 0.0],
        [0.0, 0.0, 0.0, 1.0, 0.0, 0.0],
        [0.0, 0.0, 0.0, 0.0, 0.5, 0.5],
    ];
    for (i, row) in displayed.iter().enumerate() {
        for (j, &want) in row.iter().enumerate() {
            close("Lambda_1", d.lambda1.get(i, j), want, 1e-9)?;
        }
    }
    Ok("spectra, hub probabilities, pi* and Lambda_1 match".into())
}

fn star_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = 0.0_f64;
    for k in 0..100 {
        let n = 3 + k % 6;
        let p = shift_chain(&random_reversible(n, &mut rng), 1.0).map_err(|e| e.to_string())?;
        let d = decompose(&p, 0, &options()).map_err(|e| format!("chain {k}: {e}"))?;
        let table = d.cdf_table(500).map_err(|e| e.to_string())?;
        worst = worst.max(table.primary.max_discrepancy(&table.convolution));
    }
    ensure(worst <= 1e-8, || format!("max discrepancy {worst:e}"))?;
    Ok(format!("100 chains, max |exact - convolution| = {worst:.2e}"))
}

fn certificates() -> Outcome {
    let mut worst = 0.0_f64;
    let mut count = 0;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut star_suite: Vec<(StochasticMatrix, usize)> = vec![
        (fixtures::six_state_star(), 0),
        (fixtures::two_state(), 0),
        (fixtures::birth_death(6, 0.3, 0.4), 0),
        (fixtures::birth_death(5, 0.2, 0.5), 2),
        (fixtures::link_counterexample(), 1),
        (fixtures::block_star().p, 0),
    ];
    for n in 3..=7 {
        star_suite.push((random_reversible(n, &mut rng), n % 3));
    }
    for (p, t) in &star_suite {
        let d = decompose(p, *t, &options()).map_err(|e| e.to_string())?;
        for (name, c) in [("Lambda_2", &d.certificates.lambda2), ("Lambda_1", &d.certificates.lambda1), ("Lambda", &d.certificates.lambda)] {
            worst = worst.max(certified(name, c)?);
            count += 1;
        }
    }
    for sizes in [vec![1], vec![2, 3], vec![3, 1, 2], vec![2, 2, 2, 1]] {
        let (p, blocks, _) = conforming_block_chain(&sizes, &mut rng);
        let dual = fit_block_dual(&p, &blocks).map_err(|e| e.to_string())?;
        let link = block_link(&blocks, &dual.mu).map_err(|e| e.to_string())?;
        let dual_init = ProbabilityVector::point_mass(sizes.len(), 0);
        let init = lift_initial(&blocks, &dual.mu, &dual_init).map_err(|e| e.to_string())?;
        let last = p.len() - 1;
        let absorbing = blocks.members(sizes.len() - 1).len() == 1;
        let c = if absorbing {
            let pa = make_absorbing(&p, last).map_err(|e| e.to_string())?;
            let ha = make_absorbing(&dual.p_hat, sizes.len() - 1).map_err(|e| e.to_string())?;
            certify(&link, Side::new(&init, &pa, last), Side::new(&dual_init, &ha, sizes.len() - 1))
        } else {
            certify(&link, Side::new(&init, &p, last), Side::new(&dual_init, &dual.p_hat, sizes.len() - 1))
        }
        .map_err(|e| e.to_string())?;
        // the absorption column is meaningful only with an absorbing singleton block
        let c = if absorbing { c } else { IntertwiningCertificate { residual_absorption: 0.0, ..c } };
        worst = worst.max(certified("block", &c)?);
        count += 1;
    }
    for n in 2..=7 {
        worst = worst.max(certified("Moran", &moran_certificate(n).map_err(|e| e.to_string())?)?);
        count += 1;
    }
    let mut ladder_suite = vec![fixtures::two_state(), fixtures::birth_death(6, 0.3, 0.4), fixtures::link_counterexample()];
    for n in 3..=6 {
        ladder_suite.push(shift_chain(&random_reversible(n, &mut rng), 1.0).map_err(|e| e.to_string())?);
    }
    for p in &ladder_suite {
        let pi = stationary_distribution(p).map_err(|e| e.to_string())?;
        let (dual, link) = build_ladder_dual(p, &pi, 0, 60).map_err(|e| e.to_string())?;
        let c = certify_ladder(p, &pi, 0, &dual, &link).map_err(|e| e.to_string())?;
        worst = worst.max(certified("ladder", &c)?);
        count += 1;
    }
    Ok(format!("{count} links certified, worst residual {worst:.2e}"))
}

fn moran_variance_formula(n: usize) -> f64 {
    let nf = n as f64;
    let h2: f64 = (1..=n).map(|j| 1.0 / (j * j) as f64).sum();
    2.0 * (nf * (nf - 1.0)).powi(2) * h2 - (nf - 1.0).powi(2) * (3.0 * nf * nf - 2.0 * nf + 2.0)
}

fn moran_closed_forms() -> Outcome {
    for n in 2..=10 {
        let m = moran_moments(n).map_err(|e| e.to_string())?;
        let want = BigRational::from_integer(((n - 1) * (n - 1)).into());
        ensure(m.mean_exact == want, || format!("n = {n}: mean {} != {want}", m.mean_exact))?;
        let formula = moran_variance_formula(n);
        close(&format!("variance n = {n}"), m.variance, formula, 1e-9 * formula.max(1.0))?;
        if n <= 8 {
            let (mean, var) = absorption_cdf(n, 5000).map_err(|e| e.to_string())?.moments();
            close(&format!("CDF mean n = {n}"), mean, m.mean, 1e-6)?;
            close(&format!("CDF variance n = {n}"), var, m.variance, 1e-6)?;
        }
    }
    let m4 = moran_moments(4).map_err(|e| e.to_string())?;
    close("n = 4 mean", m4.mean, 9.0, 0.0)?;
    close("n = 4 variance", m4.variance, 32.0, 1e-12)?;
    Ok("mean exact for n <= 10; variance and CDF moments agree; n = 4 gives 9 and 32".into())
}

fn compound_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4242);
    let (mut reversible, mut other) = (0, 0);
    let (mut cdf, mut recursion) = (0.0_f64, 0.0_f64);
    let mut attempts = 0;
    while reversible + other < 100 {
        attempts += 1;
        ensure(attempts < 2000, || "too few monotone chains".into())?;
        let n = rng.random_range(2..=7);
        let want_other = other < 30;
        let p = if want_other {
            random_chain(n, rng.random_range(0.5..0.9), &mut rng)
        } else {
            shift_chain(&random_reversible(n, &mut rng), 1.0).map_err(|e| e.to_string())?
        };
        let pi = stationary_distribution(&p).map_err(|e| e.to_string())?;
        if !check_p00_monotone(&p, &pi, 0, 201).map_err(|e| e.to_string())?.monotone {
            continue;
        }
        let is_rev = check_reversible(&p, &pi).map_err(|e| e.to_string())?.reversible;
        if want_other == is_rev {
            continue;
        }
        let a = analyze_v(&p, 0, 200, None).map_err(|e| e.to_string())?;
        cdf = cdf.max(a.cdf_max_discrepancy.unwrap_or(f64::INFINITY));
        recursion = recursion.max(a.recursion_residual.unwrap_or(f64::INFINITY));
        if is_rev {
            reversible += 1;
        } else {
            other += 1;
        }
    }
    ensure(other >= 10, || format!("only {other} non-reversible chains"))?;
    ensure(cdf <= 1e-9, || format!("CDF discrepancy {cdf:e}"))?;
    ensure(recursion <= 1e-10, || format!("recursion residual {recursion:e}"))?;
    Ok(format!("{reversible} reversible + {other} non-reversible, CDF {cdf:.2e}, recursion {recursion:.2e}"))
}

fn sample_path_linking() -> Outcome {
    let chain = fixtures::block_star();
    ensure(chain.blocks.num_blocks() == 4 && chain.blocks.sizes().iter().all(|&s| s <= 3), || "shape".into())?;
    let d = decompose(&chain.p, 0, &options()).map_err(|e| e.to_string())?;
    ensure(d.lambda_is_stochastic(), || format!("Lambda min entry {:e}", d.lambda.min_entry()))?;
    let config = LinkSimConfig { paths: 100_000, max_length: 2000, checkpoints: vec![1, 2, 3, 5, 8, 13, 21], seed: 42, workers: 4 };
    let stats = simulate_linked(
        &d.lambda,
        Side::new(&d.pi, &d.p_abs, 0),
        Side::new(&d.dual.pi_hat, &d.dual.p_hat, 0),
        &config,
    )
    .map_err(|e| e.to_string())?;
    ensure(stats.absorption_agreements == stats.paths, || {
        format!("{} of {} pairs agree", stats.absorption_agreements, stats.paths)
    })?;
    let (cells, _) = stats.conditional_cells(&d.lambda, 3.0, 30);
    let within = cells.iter().filter(|c| c.within).count();
    let fraction = within as f64 / cells.len() as f64;
    ensure(!cells.is_empty() && fraction >= 0.99, || format!("{within}/{} cells within 3 SE", cells.len()))?;
    Ok(format!("{} pairs agree on T_0; {within}/{} cells within 3 SE", stats.paths, cells.len()))
}

fn stationary_tail() -> Outcome {
    let suite = [
        ("six-state star", fixtures::six_state_star()),
        ("two-state", fixtures::two_state()),
        ("birth-death", fixtures::birth_death(6, 0.3, 0.4)),
        ("counterexample", fixtures::link_counterexample()),
        ("block star", fixtures::block_star().p),
        ("two-cycle", fixtures::two_cycle()),
    ];
    let mut worst = 0.0_f64;
    for (name, p) in &suite {
        let d = decompose(p, 0, &options()).map_err(|e| format!("{name}: {e}"))?;
        let r = d.stationary_tail_residual(300);
        ensure(r <= 1e-10, || format!("{name}: {r:e}"))?;
        worst = worst.max(r);
    }
    Ok(format!("{} fixtures, worst {worst:.2e}", suite.len()))
}

fn star_collapse() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let holds = [0.2, 0.45, 0.7, 0.9];
    let mut worst = 0.0_f64;
    for k in 0..50 {
        let p = random_star(2 + k % 7, &holds, &mut rng);
        let collapsed = collapse_star(&p).map_err(|e| e.to_string())?;
        // the star construction applies to the chain itself, not a lazy shift of it
        let raw = DecomposeOptions { auto_shift: false, ..options() };
        let d = decompose(&p, 0, &raw).map_err(|e| format!("star {k}: {e}"))?;
        let (a, b) = (collapsed.p_star.matrix(), d.star.p_star.matrix());
        ensure(a.shape() == b.shape(), || format!("star {k}: shapes {:?} vs {:?}", a.shape(), b.shape()))?;
        worst = worst.max((a - b).amax());
        let pi = stationary_distribution(&p).map_err(|e| e.to_string())?;
        for (g, members) in collapsed.groups.iter().enumerate() {
            let mass: f64 = members.iter().map(|&j| pi[j]).sum();
            worst = worst.max((collapsed.pi_star[g + 1] - mass).abs());
        }
    }
    ensure(worst <= 1e-9, || format!("entrywise difference {worst:e}"))?;
    let (_, pi_star) = collapse_star_exact(&fixtures::six_state_star_exact()).map_err(|e| e.to_string())?;
    let want: Vec<BigRational> = [6, 8, 3, 4].iter().map(|&x| BigRational::new(x.into(), 21.into())).collect();
    ensure(pi_star == want, || format!("exact pi* {pi_star:?}"))?;
    Ok(format!("50 stars agree to {worst:.2e}; exact pi* = (6,8,3,4)/21"))
}

fn main() {
    let criteria: [Criterion; 8] = [
        (1, "star example reproduction", star_example_reproduction, Duration::from_secs(1)),
        (2, "hitting CDF = modified-geometric convolution", star_equivalence, Duration::from_secs(30)),
        (3, "intertwining certificates", certificates, Duration::from_secs(60)),
        (4, "Moran closed forms", moran_closed_forms, Duration::from_secs(10)),
        (5, "compound-geometric representation", compound_equivalence, Duration::from_secs(30)),
        (6, "sample-path linking", sample_path_linking, Duration::from_secs(60)),
        (7, "stationary tail identity", stationary_tail, Duration::from_secs(60)),
        (8, "star collapse", star_collapse, Duration::from_secs(60)),
    ];
    let mut failed = 0;
    for (id, name, run, budget) in criteria {
        let start = Instant::now();
        let outcome = run();
        let elapsed = start.elapsed();
        let outcome = outcome.and_then(|detail| {
            ensure(elapsed <= budget, || format!("took {elapsed:.2?}, budget {budget:?}")).map(|_| detail)
        });
        match outcome {
            Ok(detail) => println!("PASS criterion {id}: {name} — {detail} [{elapsed:.2?}]"),
            Err(why) => {
                failed += 1;
                println!("FAIL criterion {id}: {name} — {why} [{elapsed:.2?}]");
            }
        }
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
