use otflow_core::{
    flow_forward, flow_map, growth_bound, lipschitz_bound, ControlSchedule, ControlledField,
    FieldFamily,
};
use proptest::prelude::*;

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|c| c * c).sum::<f64>().sqrt()
}

fn families() -> Vec<FieldFamily> {
    vec![
        FieldFamily::hermite2d(10.0).unwrap(),
        FieldFamily::hermite2d(0.5).unwrap(),
        FieldFamily::hermite_nd(3, 5.0).unwrap(),
        FieldFamily::translations(2).unwrap(),
        FieldFamily::linear(2).unwrap(),
    ]
}

fn point(dim: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-3.0f64..3.0, dim)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn jacobian_matches_central_differences(x in point(3), u in prop::collection::vec(-1.0f64..1.0, 14)) {
        for f in families() {
            let (n, k) = (f.dim(), f.channels());
            let (x, u) = (&x[..n], &u[..k.min(14)]);
            let u: Vec<f64> = (0..k).map(|j| u[j % u.len()]).collect();
            let jac = f.jacobian(x, &u);
            let h = 1e-6;
            for b in 0..n {
                let mut xp = x.to_vec();
                let mut xm = x.to_vec();
                xp[b] += h;
                xm[b] -= h;
                let (mut vp, mut vm) = (vec![0.0; n], vec![0.0; n]);
                f.velocity_into(&xp, &u, &mut vp);
                f.velocity_into(&xm, &u, &mut vm);
                for a in 0..n {
                    let fd = (vp[a] - vm[a]) / (2.0 * h);
                    let exact = jac[a * n + b];
                    prop_assert!((fd - exact).abs() <= 1e-5 * (1.0 + exact.abs()), "{f} ({a},{b}): {fd} vs {exact}");
                }
            }
        }
    }

    #[test]
    fn field_constants_hold_channelwise(x in point(3), y in point(3)) {
        for f in families() {
            let (n, k) = (f.dim(), f.channels());
            let (fx, fy) = (f.eval(&x[..n]), f.eval(&y[..n]));
            let dist = norm(&x[..n].iter().zip(&y[..n]).map(|(a, b)| a - b).collect::<Vec<_>>());
            for j in 0..k {
                let cx: Vec<f64> = (0..n).map(|a| fx[a * k + j]).collect();
                let cy: Vec<f64> = (0..n).map(|a| fy[a * k + j]).collect();
                let diff = norm(&cx.iter().zip(&cy).map(|(a, b)| a - b).collect::<Vec<_>>());
                prop_assert!(diff <= f.lipschitz_constant() * dist + 1e-12, "{f} channel {j}");
                prop_assert!(norm(&cx) <= f.growth_constant() + norm(&x[..n]) + 1e-12, "{f} channel {j}");
            }
        }
    }

    #[test]
    fn flow_stays_within_a_priori_bounds(
        x in point(2),
        dx in point(2),
        values in prop::collection::vec(-0.3f64..0.3, 8 * 14),
    ) {
        let m = 8;
        let slack = 1.0 + 10.0 / m as f64;
        for f in [FieldFamily::translations(2).unwrap(), FieldFamily::hermite2d(10.0).unwrap()] {
            let k = f.channels();
            let u = ControlSchedule::from_flat(m, k, values[..m * k].to_vec()).unwrap();
            let rho = u.l2_norm();
            let y: Vec<f64> = x.iter().zip(&dx).map(|(a, b)| a + 0.01 * b).collect();
            let trajs = flow_map(&f, &u, &[x.clone(), y.clone()]).unwrap();
            let r = norm(&x);
            let bound = growth_bound(&f, r, rho);
            for z in trajs[0].states() {
                prop_assert!(norm(z) <= bound * slack, "{f}: |z| = {} > {bound}", norm(z));
            }
            let gap0 = norm(&x.iter().zip(&y).map(|(a, b)| a - b).collect::<Vec<_>>());
            let gap1 = norm(&trajs[0].terminal().iter().zip(trajs[1].terminal()).map(|(a, b)| a - b).collect::<Vec<_>>());
            prop_assert!(gap1 <= lipschitz_bound(&f, rho) * gap0 * slack + 1e-12, "{f}");
        }
    }
}

#[test]
fn euler_error_is_first_order() {
    // ẋ = x with x(0) = 1 has x(1) = e; Euler gives (1 + 1/M)^M.
    let f = FieldFamily::linear(1).unwrap();
    let err = |m: usize| {
        let u = ControlSchedule::constant(m, &[1.0]).unwrap();
        (flow_forward(&f, &u, &[1.0]).unwrap().terminal()[0] - std::f64::consts::E).abs()
    };
    for m in [16, 32, 64, 128] {
        let ratio = err(m) / err(2 * m);
        assert!((ratio - 2.0).abs() <= 0.4, "M = {m}: ratio {ratio}");
    }
}

#[test]
fn flows_are_deterministic() {
    let f = FieldFamily::hermite2d(10.0).unwrap();
    let values: Vec<f64> = (0..16 * 14).map(|i| ((i * 37 % 11) as f64 - 5.0) * 0.03).collect();
    let u = ControlSchedule::from_flat(16, 14, values).unwrap();
    let pts = vec![vec![0.1, -0.2], vec![0.4, 0.3]];
    let a = flow_map(&f, &u, &pts).unwrap();
    let b = flow_map(&f, &u, &pts).unwrap();
    for (ta, tb) in a.iter().zip(&b) {
        assert!(ta.states().zip(tb.states()).all(|(p, q)| p.iter().zip(q).all(|(x, y)| x.to_bits() == y.to_bits())));
    }
}
