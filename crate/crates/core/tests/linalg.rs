mod common;

use common::{companion, complex_distance, random_roots, rng};
use msequiv::{eigenvalues, Cplx, Matrix};
use rand::Rng;

#[test]
fn companion_roots_are_recovered() {
    let mut r = rng(5);
    for _ in 0..300 {
        let roots = random_roots(&mut r);
        let ev = eigenvalues(&companion(&roots)).unwrap();
        assert_eq!(ev.len(), roots.len());
        let d = complex_distance(&ev, &roots);
        assert!(d < 1e-8, "roots {roots:?} got {ev:?} ({d:e})");
    }
}

#[test]
fn trace_and_determinant_match() {
    let mut r = rng(9);
    for _ in 0..200 {
        let n = r.gen_range(2..12);
        let a = Matrix::from_fn(n, n, |_, _| r.gen_range(-1.0..1.0));
        let ev = eigenvalues(&a).unwrap();
        let tr: f64 = (0..n).map(|i| a[(i, i)]).sum();
        let sum: Cplx<f64> = ev.iter().sum();
        let prod = ev.iter().fold(Cplx::new(1.0, 0.0), |p, l| p * l);
        let det = msequiv::linalg::det(&a);
        assert!((sum.re - tr).abs() < 1e-9 && sum.im.abs() < 1e-9);
        assert!((prod.re - det).abs() < 1e-9 * det.abs().max(1.0) && prod.im.abs() < 1e-9);
    }
}

#[test]
fn triangular_and_diagonal() {
    let a = Matrix::from_rows(&[vec![2.0, 5.0, -1.0], vec![0.0, -3.0, 4.0], vec![0.0, 0.0, 0.5]]);
    let mut ev: Vec<f64> = eigenvalues(&a).unwrap().iter().map(|c| c.re).collect();
    ev.sort_by(f64::total_cmp);
    assert_eq!(ev.len(), 3);
    for (g, w) in ev.iter().zip([-3.0, 0.5, 2.0]) {
        assert!((g - w).abs() < 1e-12);
    }
    let rot = Matrix::from_rows(&[vec![0.0, -1.0], vec![1.0, 0.0]]);
    let ev = eigenvalues(&rot).unwrap();
    assert!(complex_distance(&ev, &[Cplx::new(0.0, 1.0), Cplx::new(0.0, -1.0)]) < 1e-12);
}
