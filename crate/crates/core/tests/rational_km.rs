use num_rational::Ratio;
use survtree::km_estimator;

type Q = Ratio<i64>;

fn q(n: i64, d: i64) -> Q {
    Q::new(n, d)
}

fn ints(v: &[i64]) -> Vec<Q> {
    v.iter().map(|&x| Q::from_integer(x)).collect()
}

#[test]
fn three_samples_exact() {
    let s = km_estimator(&ints(&[1, 2, 3]), &[true, true, false]).unwrap();
    assert_eq!(s.eval(q(1, 2)), q(1, 1));
    assert_eq!(s.eval(q(1, 1)), q(2, 3));
    assert_eq!(s.eval(q(3, 2)), q(2, 3));
    assert_eq!(s.eval(q(2, 1)), q(1, 3));
    assert_eq!(s.eval(q(100, 1)), q(1, 3));
}

#[test]
fn four_samples_with_censoring_exact() {
    let times = ints(&[1, 2, 3, 4]);
    let s = km_estimator(&times, &[true, false, true, true]).unwrap();
    assert_eq!(s.eval(q(1, 2)), q(1, 1));
    assert_eq!(s.eval(q(1, 1)), q(3, 4));
    assert_eq!(s.eval(q(5, 2)), q(3, 4));
    assert_eq!(s.eval(q(3, 1)), q(3, 8));
    assert_eq!(s.eval(q(4, 1)), q(0, 1));

    let g = km_estimator(&times, &[false, true, false, false]).unwrap();
    assert_eq!(g.eval(q(3, 2)), q(1, 1));
    assert_eq!(g.eval(q(2, 1)), q(2, 3));
    assert_eq!(g.eval(q(9, 1)), q(2, 3));
}

#[test]
fn float_path_agrees_with_rationals() {
    let s = km_estimator::<f64>(&[1.0, 2.0, 3.0, 4.0], &[true, false, true, true]).unwrap();
    for (t, exact) in [(1.0, 0.75), (3.0, 0.375), (4.0, 0.0)] {
        assert!((s.eval(t) - exact).abs() <= 1e-12);
    }
    let s = km_estimator::<f64>(&[1.0, 2.0, 3.0], &[true, true, false]).unwrap();
    assert!((s.eval(1.0) - 2.0 / 3.0).abs() <= 1e-12);
    assert!((s.eval(2.0) - 1.0 / 3.0).abs() <= 1e-12);
}
