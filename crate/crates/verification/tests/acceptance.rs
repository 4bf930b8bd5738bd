//! End-to-end acceptance checks on the MSC fixture. Prints one PASS/FAIL
//! line per criterion and exits non-zero if any fails.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::*;
use msequiv::analysis::{check_equivalence, find_steady_states, EquivalenceOptions, LiftSpec, SteadyStateOptions};
use msequiv::construction::{assemble_high_dim, steady_state_gain};
use msequiv::continuation::{continue_branch, ContinuationOptions};
use msequiv::dynamics::integrate;
use msequiv::fixture::{msc_expected, msc_low_dim, msc_sign_matrix, EPSILON, MASTERS};
use msequiv::frequency::{compare_nyquist, loopbreak, nyquist_curve, NyquistOptions};
use msequiv::{check_modular_structure, eigenvalues, parse_expression, GrnSystem, HighDimModel, LowDimModel, Parametric};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn low() -> LowDimModel {
    LowDimModel::new(msc_low_dim())
}

fn high_with(k: &[f64; 6]) -> HighDimModel {
    let s = msc_sign_matrix();
    let a = check_modular_structure(&s, MASTERS).expect("fixture is modular");
    assemble_high_dim(&low(), &s, &a, k, &[EPSILON; MASTERS]).expect("fixture constructs")
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn construction_regression() -> Outcome {
    let h = high_with(&MSC_K);
    let mut r = rng(1);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let x = random_point(&mut r, 9, 1e-3, 20.0);
        let got = h.rhs(&x).map_err(|e| e.to_string())?;
        let want = msc_high_rhs(&x, &MSC_K, &DEFAULT_PARAMS);
        for (g, w) in got.iter().zip(&want) {
            worst = worst.max(rel_err(*g, *w));
        }
    }
    ensure(worst < 1e-12, || format!("max relative error {worst:e}"))?;
    Ok(format!("max relative error {worst:.1e} over 100 points"))
}

fn gains() -> Outcome {
    let s = msc_sign_matrix();
    let a = check_modular_structure(&s, MASTERS).map_err(|e| e.to_string())?;
    let closed = msc_gains(&MSC_K);
    let expected = [1.0, 1.0, 2.0, 1.0, 1.0, 1.0];
    let genes = [(0, 3), (0, 4), (0, 5), (1, 6), (1, 7), (1, 8)];
    let mut worst: f64 = 0.0;
    for (((master, gene), c), e) in genes.iter().zip(closed).zip(expected) {
        let g = steady_state_gain(&a, &s, &MSC_K, *master, *gene).map_err(|e| e.to_string())?;
        worst = worst.max((g - c).abs()).max((g - e).abs());
    }
    ensure(worst < 1e-12, || format!("max gain error {worst:e}"))?;
    Ok(format!("gamma = (1, 1, 2, 1, 1, 1), max error {worst:.1e}"))
}

/// Pairs each tabulated state with its nearest computed one; returns the
/// indices and the largest componentwise distance.
fn match_table<const N: usize>(xs: &[Vec<f64>], table: &[[f64; N]; 5]) -> Result<(Vec<usize>, f64), String> {
    ensure(xs.len() == 5, || format!("found {} states, expected 5", xs.len()))?;
    let mut idx = Vec::new();
    let mut worst: f64 = 0.0;
    for row in table {
        let (i, d) = xs
            .iter()
            .enumerate()
            .map(|(i, x)| (i, max_abs_diff(x, row)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        ensure(!idx.contains(&i), || "two tabulated states match the same computed state".into())?;
        idx.push(i);
        worst = worst.max(d);
    }
    Ok((idx, worst))
}

fn steady_states() -> Outcome {
    let g = msc_expected();
    let t = Instant::now();
    let ls = find_steady_states(&low(), &SteadyStateOptions::default());
    let tl = t.elapsed();
    let t = Instant::now();
    let hs = find_steady_states(&high_with(&MSC_K), &SteadyStateOptions::default());
    let th = t.elapsed();
    let (_, dl) = match_table(&ls.iter().map(|s| s.x.clone()).collect::<Vec<_>>(), &g.low_states)?;
    let (_, dh) = match_table(&hs.iter().map(|s| s.x.clone()).collect::<Vec<_>>(), &g.high_states)?;
    let limit = Duration::from_secs(30);
    let detail = format!(
        "5 + 5 states, max deviation low {dl:.4} / high {dh:.4}, runtime {:.2}s / {:.2}s",
        tl.as_secs_f64(),
        th.as_secs_f64()
    );
    ensure(dl < 0.01 && dh < 0.01 && tl < limit && th < limit, || detail.clone())?;
    Ok(detail)
}

fn eigenvalue_tables() -> Outcome {
    let g = msc_expected();
    let ls = find_steady_states(&low(), &SteadyStateOptions::default());
    let hs = find_steady_states(&high_with(&MSC_K), &SteadyStateOptions::default());
    let (li, _) = match_table(&ls.iter().map(|s| s.x.clone()).collect::<Vec<_>>(), &g.low_states)?;
    let (hi, _) = match_table(&hs.iter().map(|s| s.x.clone()).collect::<Vec<_>>(), &g.high_states)?;
    let mut worst: f64 = 0.0;
    let mut counts = (Vec::new(), Vec::new());
    for row in 0..5 {
        let (l, h) = (&ls[li[row]], &hs[hi[row]]);
        worst = worst
            .max(spectrum_distance(&l.eigenvalues, &g.low_eigenvalues[row]))
            .max(spectrum_distance(&h.eigenvalues, &g.high_eigenvalues[row]));
        counts.0.push(l.unstable_count);
        counts.1.push(h.unstable_count);
    }
    let want = g.unstable_counts.to_vec();
    let detail = format!("max eigenvalue deviation {worst:.4}, unstable counts {:?} / {:?}", counts.0, counts.1);
    ensure(worst < 0.02 && counts.0 == want && counts.1 == want, || detail.clone())?;
    Ok(detail)
}

fn equivalence() -> Outcome {
    let h = high_with(&MSC_K);
    let r = check_equivalence(&low(), &h, &LiftSpec::of(&h), &EquivalenceOptions::default()).map_err(|e| e.to_string())?;
    let lift = r.pairs.iter().map(|p| p.lift_residual).fold(0.0, f64::max);
    let (lc, hc) = r.unstable_counts();
    let detail = format!(
        "sign check {} at {} points, max lift residual {lift:.1e} over {} pairs, counts {lc:?} / {hc:?}, verdict {}",
        if r.sign_check.passed { "passed" } else { "failed" },
        r.sign_check.samples,
        r.pairs.len(),
        r.verdict
    );
    ensure(
        r.sign_check.passed && r.sign_check.samples == 1000 && r.pairs.len() == 5 && lift < 1e-8 && lc == hc && r.verdict,
        || detail.clone(),
    )?;
    Ok(detail)
}

fn argument_principle_property() -> Outcome {
    let run = argument_principle(6, 200);
    let detail = format!(
        "{} systems, {} failures, {} regenerated ({:.1}%)",
        run.accepted,
        run.failures.len(),
        run.regenerated,
        100.0 * run.regenerated as f64 / (run.accepted + run.regenerated) as f64
    );
    ensure(run.failures.is_empty(), || format!("{detail}: {:?}", run.failures))?;
    Ok(detail)
}

fn nyquist_convergence() -> Outcome {
    let l = low();
    let states = find_steady_states(&l, &SteadyStateOptions::default());
    ensure(states.len() == 5, || format!("found {} low states", states.len()))?;
    let scales = [1.0, 10.0, 100.0, 1000.0];
    let mut dev = vec![Vec::new(); states.len()];
    let mut tube = vec![Vec::new(); states.len()];
    for scale in scales {
        let k = MSC_K.map(|v| v * scale);
        let h = high_with(&k);
        for (i, s) in states.iter().enumerate() {
            let opts = NyquistOptions::default();
            let lc = nyquist_curve(&loopbreak(&l, &s.x).map_err(|e| e.to_string())?, &opts).map_err(|e| e.to_string())?;
            let x = h.lift(&s.x);
            let hc = nyquist_curve(&loopbreak(&h, &x).map_err(|e| e.to_string())?, &opts).map_err(|e| e.to_string())?;
            let t = compare_nyquist(&lc, &hc);
            dev[i].push(t.max_deviation);
            tube[i].push(t.within_tube);
        }
    }
    let decreasing = dev.iter().all(|d| d.windows(2).all(|w| w[1] < w[0]));
    let in_tube = tube.iter().flatten().all(|t| *t);
    let rows: Vec<String> = dev
        .iter()
        .zip(&tube)
        .enumerate()
        .map(|(i, (d, t))| {
            let cells: Vec<String> = d.iter().zip(t).map(|(d, t)| format!("{d:.1e}{}", if *t { "" } else { "!" })).collect();
            format!("state {}: {}", i + 1, cells.join(" "))
        })
        .collect();
    let detail = format!(
        "sup deviation at K x {{1, 10, 100, 1000}} ('!' = outside tube): {}",
        rows.join("; ")
    );
    ensure(decreasing && in_tube, || detail.clone())?;
    Ok(detail)
}

fn bifurcation() -> Outcome {
    let t = Instant::now();
    let mut last = Vec::new();
    for (param, range) in [("uO", (0.0, 6.0)), ("m", (1.0, 6.0))] {
        let mut m = low();
        let idx = m.parameter_index(param).ok_or("missing parameter")?;
        m.set_parameter(idx, range.0);
        let mut fold: Option<f64> = None;
        for s in find_steady_states(&m, &SteadyStateOptions::default()).iter().filter(|s| s.is_stable()) {
            let b = continue_branch(&m, param, range, &s.x, &ContinuationOptions::default()).map_err(|e| e.to_string())?;
            for f in &b.folds {
                fold = Some(fold.map_or(f.param, |v: f64| v.max(f.param)));
            }
        }
        last.push(fold.ok_or_else(|| format!("no fold in {param}"))?);
    }
    let g = msc_expected();
    let elapsed = t.elapsed();
    let detail = format!(
        "last fold uO = {:.4}, m = {:.4}, runtime {:.2}s",
        last[0],
        last[1],
        elapsed.as_secs_f64()
    );
    ensure(
        (last[0] - g.u_o_critical).abs() <= 0.2 && (last[1] - g.m_critical).abs() <= 0.2 && elapsed < Duration::from_secs(60),
        || detail.clone(),
    )?;
    Ok(detail)
}

fn dynamics() -> Outcome {
    let g = msc_expected();
    let l = low();
    let h = high_with(&MSC_K);
    let err = |e: msequiv::dynamics::DynamicsError| e.to_string();
    let zt = integrate(&l, &g.initial_low, 200.0, 1e-8, 1e-10).map_err(err)?;
    let xt = integrate(&h, &g.initial_high, 200.0, 1e-8, 1e-10).map_err(err)?;
    let dist = max_abs_diff(zt.last(), &xt.last()[..3]);
    let lift = max_abs_diff(&h.lift(zt.last()), xt.last());

    // Self-convergence: error against a tight reference shrinks with the tolerance.
    let reference = integrate(&h, &g.initial_high, 200.0, 1e-12, 1e-14).map_err(err)?;
    let mut errs = Vec::new();
    for tol in [1e-5, 1e-7, 1e-9] {
        let r = integrate(&h, &g.initial_high, 200.0, tol, tol * 1e-2).map_err(err)?;
        errs.push(
            r.states
                .iter()
                .zip(&reference.states)
                .map(|(a, b)| max_abs_diff(a, b))
                .fold(0.0, f64::max),
        );
    }
    let converges = errs.windows(2).all(|w| w[1] < w[0]) && errs[2] < 1e-6;
    let detail = format!(
        "master endpoint distance {dist:.1e}, lift distance {lift:.1e}, self-convergence errors {:?}",
        errs.iter().map(|e| format!("{e:.1e}")).collect::<Vec<_>>()
    );
    ensure(dist < 1e-2 && lift < 1e-2 && converges, || detail.clone())?;
    Ok(detail)
}

fn oracle_suites() -> Outcome {
    let mut r = rng(10);
    // Symbolic Jacobians against central differences, both fixture models.
    let h = high_with(&MSC_K);
    let l = low();
    let models: [(&dyn GrnSystem<f64>, usize); 2] = [(&l, 3), (&h, 9)];
    let mut jac_worst: f64 = 0.0;
    for (m, n) in models {
        for _ in 0..100 {
            let x = random_point(&mut r, n, 0.01, 15.0);
            let j = m.jacobian(&x).map_err(|e| e.to_string())?;
            for col in 0..n {
                let step = 1e-6 * x[col].max(1.0);
                let (mut xp, mut xm) = (x.clone(), x.clone());
                xp[col] += step;
                xm[col] -= step;
                let fp = m.rhs(&xp).map_err(|e| e.to_string())?;
                let fm = m.rhs(&xm).map_err(|e| e.to_string())?;
                for row in 0..n {
                    let fd = (fp[row] - fm[row]) / (2.0 * step);
                    jac_worst = jac_worst.max((fd - j[(row, col)]).abs() / j[(row, col)].abs().max(1e-3));
                }
            }
        }
    }

    let mut eig_worst: f64 = 0.0;
    for _ in 0..300 {
        let roots = random_roots(&mut r);
        let ev = eigenvalues(&companion(&roots)).map_err(|e| e.to_string())?;
        eig_worst = eig_worst.max(complex_distance(&ev, &roots));
    }

    let vars: Vec<String> = (1..=4).map(|i| format!("z{i}")).collect();
    let params: Vec<String> = (1..=2).map(|i| format!("p{i}")).collect();
    let mut parse_failures = 0;
    for _ in 0..1000 {
        let e = random_expr(&mut r, 5, 4, 2);
        let text = e.display_with(&vars, &params).to_string();
        if parse_expression(&text, &vars, &params).ok() != Some(e) {
            parse_failures += 1;
        }
    }
    let detail = format!(
        "Jacobian rel error {jac_worst:.1e}, eigenvalue error {eig_worst:.1e}, parser round-trip failures {parse_failures}/1000"
    );
    ensure(jac_worst < 1e-6 && eig_worst < 1e-8 && parse_failures == 0, || detail.clone())?;
    Ok(detail)
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("construction regression", construction_regression),
        ("module gains", gains),
        ("steady states", steady_states),
        ("eigenvalues", eigenvalue_tables),
        ("equivalence report", equivalence),
        ("argument principle", argument_principle_property),
        ("Nyquist K-convergence", nyquist_convergence),
        ("bifurcation", bifurcation),
        ("dynamics", dynamics),
        ("oracle suites", oracle_suites),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
