//! Shared oracles for the integration tests: a hand-written closed form of
//! the constructed MSC system and small comparison helpers.

#![allow(dead_code)]

use msequiv::Cplx;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const MSC_K: [f64; 6] = [3.0, 3.0, 1.0, 1.0, 1.0, 1.0];

pub struct MscParams {
    pub m: f64,
    pub u_a: f64,
    pub u_o: f64,
    pub u_c: f64,
}

pub const DEFAULT_PARAMS: MscParams = MscParams {
    m: 1.0,
    u_a: 0.0,
    u_o: 0.0,
    u_c: 0.0,
};

/// Module gains `(g41, g51, g61, g72, g82, g92)` of the MSC network as
/// functions of `K = (K4..K9)`, solved by hand from the linear module
/// equations at steady state.
pub fn msc_gains(k: &[f64; 6]) -> [f64; 6] {
    let [k4, k5, k6, k7, k8, k9] = *k;
    let den = k4 * k5 - k4 - k5;
    [k5 / den, k4 / den, (k4 + k5) / (k6 * den), 1.0 / k7, 1.0 / k8, 1.0 / k9]
}

/// Right-hand side of the nine-gene MSC system, written out by hand.
pub fn msc_high_rhs(x: &[f64], k: &[f64; 6], p: &MscParams) -> [f64; 9] {
    let [g41, _, _, _, g82, g92] = msc_gains(k);
    let [k4, k5, k6, k7, k8, k9] = *k;
    let sq = |v: f64| v * v;
    [
        (0.2 * sq(x[0]) + 0.5 + p.u_a) / (10.0 * p.m + 0.1 * sq(x[0]) + 0.5 * sq(x[8] / g92) + 0.5 * sq(x[2]))
            - 0.1 * x[0],
        (0.1 * sq(x[1]) + 1.0 + p.u_o) / (p.m + 0.1 * sq(x[1]) + 0.5 * sq((x[0] + x[3] / g41) / 2.0) + 0.1 * sq(x[2]))
            - 0.1 * x[1],
        (0.1 * sq(x[2]) + 1.0 + p.u_c) / (p.m + 0.1 * sq(x[2]) + 0.5 * sq(x[3] / g41) + 0.1 * sq(x[7] / g82))
            - 0.1 * x[2],
        x[0] + x[3] + x[4] - k4 * x[3],
        x[0] + x[3] + x[4] - k5 * x[4],
        x[3] + x[4] - k6 * x[5],
        x[1] - k7 * x[6],
        x[1] - k8 * x[7],
        x[1] - k9 * x[8],
    ]
}

/// Three-gene MSC system, written out by hand.
pub fn msc_low_rhs(z: &[f64], p: &MscParams) -> [f64; 3] {
    let sq = |v: f64| v * v;
    [
        (0.2 * sq(z[0]) + 0.5 + p.u_a) / (10.0 * p.m + 0.1 * sq(z[0]) + 0.5 * sq(z[1]) + 0.5 * sq(z[2])) - 0.1 * z[0],
        (0.1 * sq(z[1]) + 1.0 + p.u_o) / (p.m + 0.1 * sq(z[1]) + 0.5 * sq(z[0]) + 0.1 * sq(z[2])) - 0.1 * z[1],
        (0.1 * sq(z[2]) + 1.0 + p.u_c) / (p.m + 0.1 * sq(z[2]) + 0.5 * sq(z[0]) + 0.1 * sq(z[1])) - 0.1 * z[2],
    ]
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform point in `(lo, hi)^dim`.
pub fn random_point(rng: &mut ChaCha8Rng, dim: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..dim).map(|_| rng.gen_range(lo..hi)).collect()
}

pub fn rel_err(got: f64, want: f64) -> f64 {
    (got - want).abs() / want.abs().max(f64::MIN_POSITIVE)
}

/// Largest distance between two spectra after pairing each expected value
/// with its nearest unused computed one.
pub fn spectrum_distance(computed: &[Cplx<f64>], expected: &[f64]) -> f64 {
    let mut used = vec![false; computed.len()];
    let mut worst: f64 = 0.0;
    for e in expected {
        let (best, d) = computed
            .iter()
            .enumerate()
            .filter(|(i, _)| !used[*i])
            .map(|(i, l)| (i, (l - Cplx::new(*e, 0.0)).norm()))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("spectra have the same size");
        used[best] = true;
        worst = worst.max(d);
    }
    worst
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Companion matrix of the monic polynomial with the given roots.
pub fn companion(roots: &[Cplx<f64>]) -> msequiv::Matrix<f64> {
    let mut c = vec![Cplx::new(1.0, 0.0)];
    for r in roots {
        let mut next = vec![Cplx::new(0.0, 0.0); c.len() + 1];
        for (i, a) in c.iter().enumerate() {
            next[i + 1] += *a;
            next[i] -= *a * r;
        }
        c = next;
    }
    let n = roots.len();
    msequiv::Matrix::from_fn(n, n, |i, j| {
        if i == 0 {
            -c[n - 1 - j].re
        } else if j + 1 == i {
            1.0
        } else {
            0.0
        }
    })
}

/// Up to 8 real or conjugate-pair roots, pairwise at least 0.2 apart.
pub fn random_roots(rng: &mut ChaCha8Rng) -> Vec<Cplx<f64>> {
    loop {
        let n = rng.gen_range(1..9);
        let mut roots = Vec::new();
        while roots.len() < n {
            let re: f64 = rng.gen_range(-3.0..3.0);
            if roots.len() + 2 <= n && rng.gen_bool(0.4) {
                let im: f64 = rng.gen_range(0.1..2.0);
                roots.push(Cplx::new(re, im));
                roots.push(Cplx::new(re, -im));
            } else {
                roots.push(Cplx::new(re, 0.0));
            }
        }
        let separated = roots
            .iter()
            .enumerate()
            .all(|(i, a)| roots.iter().skip(i + 1).all(|b| (a - b).norm() > 0.2));
        if separated {
            return roots;
        }
    }
}

/// Largest distance after pairing each expected value with its nearest
/// unused computed one.
pub fn complex_distance(computed: &[Cplx<f64>], expected: &[Cplx<f64>]) -> f64 {
    let mut used = vec![false; computed.len()];
    let mut worst: f64 = 0.0;
    for e in expected {
        let (i, d) = computed
            .iter()
            .enumerate()
            .filter(|(i, _)| !used[*i])
            .map(|(i, c)| (i, (c - e).norm()))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        used[i] = true;
        worst = worst.max(d);
    }
    worst
}

/// Random expression over `vars` variables and `params` parameters with
/// non-negative literals.
pub fn random_expr(rng: &mut ChaCha8Rng, depth: u32, vars: usize, params: usize) -> msequiv::Expr {
    use msequiv::Expr;
    if depth == 0 || rng.gen_bool(0.25) {
        return match rng.gen_range(0..4) {
            0 => Expr::Const(rng.gen_range(0u32..10_000) as f64 / 100.0),
            1 => Expr::Const([1e-7, 2.5e12, 0.1, 3.0][rng.gen_range(0..4)]),
            2 => Expr::Var(rng.gen_range(0..vars)),
            _ => Expr::Param(rng.gen_range(0..params)),
        };
    }
    let op = rng.gen_range(0..6);
    let k = rng.gen_range(-3..=4);
    let mut sub = || Box::new(random_expr(rng, depth - 1, vars, params));
    match op {
        0 => Expr::Neg(sub()),
        1 => Expr::Add(sub(), sub()),
        2 => Expr::Sub(sub(), sub()),
        3 => Expr::Mul(sub(), sub()),
        4 => Expr::Div(sub(), sub()),
        _ => Expr::Pow(sub(), k),
    }
}

/// Outcome of comparing winding numbers with eigenvalue counts on random
/// loopbroken systems.
#[derive(Debug, Default)]
pub struct ArgumentPrincipleRun {
    pub accepted: usize,
    pub regenerated: usize,
    pub failures: Vec<String>,
    /// Accepted systems by unstable count.
    pub histogram: [usize; 6],
}

/// Random `3..=5`-dimensional systems with decay in `[0.1, 2)`; systems whose
/// curve passes within `1e-6` of the origin are drawn again.
pub fn argument_principle(seed: u64, systems: usize) -> ArgumentPrincipleRun {
    use msequiv::frequency::{nyquist_curve, FrequencyError, NyquistOptions};
    use msequiv::{eigenvalues, LoopbrokenSystem, Matrix};
    let mut r = rng(seed);
    let mut run = ArgumentPrincipleRun::default();
    while run.accepted < systems {
        let n = r.gen_range(3..6);
        let d: Vec<f64> = (0..n).map(|_| r.gen_range(0.1..2.0)).collect();
        let a = Matrix::from_fn(n, n, |_, _| if r.gen_bool(0.7) { r.gen_range(-2.0..2.0) } else { 0.0 });
        let sys = LoopbrokenSystem::new(d, a).expect("positive decay");
        let ev = eigenvalues(&sys.closed_loop()).expect("eigenvalues");
        let expected = ev.iter().filter(|l| l.re > 0.0).count();
        let curve = match nyquist_curve(&sys, &NyquistOptions::default()) {
            Ok(c) if c.min_distance >= 1e-6 => c,
            Ok(_) | Err(FrequencyError::ImaginaryAxis { .. }) => {
                run.regenerated += 1;
                continue;
            }
            Err(e) => {
                run.failures.push(e.to_string());
                run.accepted += 1;
                continue;
            }
        };
        if curve.winding != -(expected as i64) {
            run.failures.push(format!("winding {} for eigenvalues {ev:?}", curve.winding));
        }
        run.histogram[expected] += 1;
        run.accepted += 1;
    }
    run
}
