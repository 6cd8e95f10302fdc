use super::*;
use proptest::prelude::*;

#[test]
fn square_derivative() {
    let tape = Tape::new();
    let x = tape.var(3.0);
    let y = x * x;
    let g = tape.backward(y).unwrap();
    assert_eq!(y.value(), 9.0);
    assert_eq!(g.get(x), 6.0);
}

#[test]
fn sum_is_linear() {
    let tape = Tape::new();
    let x = tape.var(-1.5);
    let y = tape.var(4.0);
    let g = tape.backward(x + y).unwrap();
    assert_eq!((g.get(x), g.get(y)), (1.0, 1.0));
}

#[test]
fn plain_min_branches() {
    for (x0, expect) in [(-2.0, 1.0), (2.0, 0.0)] {
        let tape = Tape::new();
        let x = tape.var(x0);
        let y = x.min(Var::constant(0.0));
        assert_eq!(tape.backward(y).unwrap().get(x), expect);
    }
}

#[test]
fn output_adjoint_is_one() {
    let tape = Tape::new();
    let x = tape.var(0.3);
    let y = x.sin();
    assert_eq!(tape.backward(y).unwrap().get(y), 1.0);
}

#[test]
fn one_node_per_primitive() {
    let tape = Tape::new();
    let x = tape.var(1.0);
    let y = tape.var(2.0);
    assert_eq!(tape.len(), 2);
    let z = x * y + x.sin();
    assert_eq!(tape.len(), 5);
    let _ = z - 1.0;
    assert_eq!(tape.len(), 6);
    // constants record nothing
    let _ = Var::constant(2.0) * Var::constant(3.0);
    assert_eq!(tape.len(), 6);
}

#[test]
fn foreign_output_is_rejected() {
    let a = Tape::new();
    let b = Tape::new();
    let x = b.var(1.0);
    assert_eq!(a.backward(x * x).unwrap_err(), DiffError::ForeignVariable);
    assert_eq!(a.backward(Var::constant(1.0)).unwrap_err(), DiffError::ForeignVariable);
}

#[test]
fn clear_resets() {
    let mut tape = Tape::new();
    {
        let x = tape.var(1.0);
        let _ = x.leaky_min_zero(0.1);
    }
    assert_eq!(tape.biased_nodes(), 1);
    tape.clear();
    assert!(tape.is_empty());
    assert_eq!(tape.biased_nodes(), 0);
    let x = tape.var(2.0);
    let g = tape.backward(x * 3.0).unwrap();
    assert_eq!(g.get(x), 3.0);
}

fn leaky(x0: f64, alpha: f64) -> (f64, f64) {
    let tape = Tape::new();
    let x = tape.var(x0);
    let y = leaky_min_zero(x, alpha);
    (y.value(), tape.backward(y).unwrap().get(x))
}

#[test]
fn leaky_min_zero_examples() {
    assert_eq!(leaky(-0.5, 0.1), (-0.5, 1.0));
    assert_eq!(leaky(0.5, 0.1), (0.0, 0.1));
    assert_eq!(leaky(0.5, 0.0), (0.0, 0.0));
    assert_eq!(leaky_min_zero(0.5f64, 0.1), 0.0);
    assert_eq!(leaky_min_zero(-0.5f64, 0.1), -0.5);
}

#[test]
fn sqrt_at_zero_has_zero_derivative() {
    let tape = Tape::new();
    let x = tape.var(0.0);
    let y = x.sqrt();
    assert_eq!(tape.backward(y).unwrap().get(x), 0.0);
    let v = [tape.var(0.0), tape.var(0.0)];
    let n = norm(&v);
    let g = tape.backward(n).unwrap();
    assert_eq!(g.wrt(&v), vec![0.0, 0.0]);
}

#[test]
fn fd_check_sine() {
    let r = finite_difference_check(|x| x[0].sin(), &[1.0], 1e-5).unwrap();
    assert!(r.max_rel_error < 1e-6, "{r:?}");
    assert!(!r.intentional_bias);
}

#[test]
fn fd_check_flags_leak() {
    let r = finite_difference_check(|x| leaky_min_zero(x[0], 0.1) * 10.0, &[0.5], 1e-5).unwrap();
    assert!(r.intentional_bias);
    assert!((r.tape_gradient[0] - 1.0).abs() < 1e-12);
    assert_eq!(r.fd_gradient[0], 0.0);
    assert!(r.max_rel_error > 0.5);
}

#[test]
fn fd_check_reports_nonfinite_coordinate() {
    let err = finite_difference_check(|x| x[0] * (Var::constant(1.0) / x[1]), &[1.0, 1e-300], 1e-5)
        .unwrap_err();
    assert!(matches!(err, DiffError::NonFinite { .. }));
}

#[test]
fn custom_node_chains() {
    // f(x, y) = g(x, y)^2 with g = 2x + 3y supplied as a custom node
    let tape = Tape::new();
    let x = tape.var(1.0);
    let y = tape.var(2.0);
    let g = Var::custom(2.0 * 1.0 + 3.0 * 2.0, &[(x, 2.0), (y, 3.0)]);
    let f = g * g;
    let gr = tape.backward(f).unwrap();
    assert_eq!(gr.get(x), 2.0 * 8.0 * 2.0);
    assert_eq!(gr.get(y), 2.0 * 8.0 * 3.0);
}

fn composite<'t>(x: &[Var<'t>]) -> Var<'t> {
    let a = x[0] * x[1] + x[2].sin();
    let b = (x[0] * x[0] + x[1] * x[1] + 1.0).sqrt();
    let c = a / b - x[2].cos() * x[0].exp();
    let d = norm(&[a, b, c]);
    d * c + sum(&[a, b, c])
}

proptest! {
    #[test]
    fn smooth_composition_matches_fd(x in -1.5f64..1.5, y in -1.5f64..1.5, z in -1.5f64..1.5) {
        let r = finite_difference_check(composite, &[x, y, z], 1e-5).unwrap();
        prop_assert!(r.max_rel_error < 1e-4, "{:?}", r);
    }

    #[test]
    fn backward_is_linear(x in -1.0f64..1.0, y in -1.0f64..1.0, a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let grad = |which: u8| {
            let tape = Tape::new();
            let v = [tape.vars(&[x, y]), vec![]].concat();
            let f = v[0] * v[1].exp();
            let g = (v[0] + v[1]).sin();
            let out = match which {
                0 => f,
                1 => g,
                _ => f * a + g * b,
            };
            tape.backward(out).unwrap().wrt(&v)
        };
        let (gf, gg, gc) = (grad(0), grad(1), grad(2));
        for i in 0..2 {
            let expect = a * gf[i] + b * gg[i];
            prop_assert!((gc[i] - expect).abs() <= 1e-12 * (1.0 + expect.abs()));
        }
    }

    #[test]
    fn leak_zero_matches_plain_min(x in -2.0f64..2.0) {
        let t1 = Tape::new();
        let v1 = t1.var(x);
        let y1 = leaky_min_zero(v1, 0.0);
        let g1 = t1.backward(y1).unwrap().get(v1);
        let t2 = Tape::new();
        let v2 = t2.var(x);
        let y2 = v2.min(Var::constant(0.0));
        let g2 = t2.backward(y2).unwrap().get(v2);
        prop_assert_eq!(y1.value().to_bits(), y2.value().to_bits());
        prop_assert_eq!(g1.to_bits(), g2.to_bits());
    }
}
