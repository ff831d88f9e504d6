//! Source and target measures of the disc-to-ellipse benchmark.

use otflow_core::{DiscreteMeasure, Error, Result};

use crate::rng::SplitMix64;

/// Parameters of `T = ∇f` with `f(x) = √((x − v)ᵀQ(x − v) + c)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetMap {
    pub q: [[f64; 2]; 2],
    pub v: [f64; 2],
    pub c: f64,
}

impl Default for TargetMap {
    fn default() -> Self {
        Self {
            q: [[3.0, 1.0], [1.0, 2.0]],
            v: [0.5, 0.5],
            c: 2.0,
        }
    }
}

impl TargetMap {
    pub fn apply(&self, x: &[f64]) -> Result<[f64; 2]> {
        target_map(x, &self.q, &self.v, self.c)
    }

    /// The potential `f`.
    pub fn potential(&self, x: &[f64]) -> Result<f64> {
        let (_, r) = quad(x, &self.q, &self.v, self.c)?;
        Ok(r.sqrt())
    }
}

fn quad(x: &[f64], q: &[[f64; 2]; 2], v: &[f64; 2], c: f64) -> Result<([f64; 2], f64)> {
    if x.len() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            got: x.len(),
        });
    }
    let d = [x[0] - v[0], x[1] - v[1]];
    let qd = [
        q[0][0] * d[0] + q[0][1] * d[1],
        q[1][0] * d[0] + q[1][1] * d[1],
    ];
    let radicand = d[0] * qd[0] + d[1] * qd[1] + c;
    if radicand.is_nan() || radicand <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "non-positive radicand {radicand} at {x:?}"
        )));
    }
    Ok((qd, radicand))
}

/// `Q(x − v) / √((x − v)ᵀQ(x − v) + c)`.
pub fn target_map(x: &[f64], q: &[[f64; 2]; 2], v: &[f64; 2], c: f64) -> Result<[f64; 2]> {
    let (qd, radicand) = quad(x, q, v, c)?;
    let s = radicand.sqrt();
    Ok([qd[0] / s, qd[1] / s])
}

/// Vertices of the triangular lattice with the origin as a vertex that lie in
/// the closed disc of the given radius, uniformly weighted.
pub fn disc_triangulation(radius: f64, spacing: f64) -> Result<DiscreteMeasure> {
    if !(radius > 0.0 && spacing > 0.0 && radius.is_finite() && spacing.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "radius {radius} and spacing {spacing} must be positive"
        )));
    }
    let row_height = spacing * 3f64.sqrt() / 2.0;
    let rows = (radius / row_height).floor() as i64;
    let cols = (radius / spacing).ceil() as i64 + 1;
    let r2 = radius * radius * (1.0 + 1e-12);
    let mut points = Vec::new();
    for r in -rows..=rows {
        let y = r as f64 * row_height;
        let offset = if r.rem_euclid(2) == 1 { spacing / 2.0 } else { 0.0 };
        for c in -cols..=cols {
            let x = c as f64 * spacing + offset;
            if x * x + y * y <= r2 {
                points.push(vec![x, y]);
            }
        }
    }
    if points.is_empty() {
        return Err(Error::Empty("triangulation contains no vertices"));
    }
    DiscreteMeasure::uniform(points)
}

/// Uniform point in the disc by rejection from the bounding square.
fn disc_point(rng: &mut SplitMix64, radius: f64) -> [f64; 2] {
    loop {
        let x = rng.uniform(-radius, radius);
        let y = rng.uniform(-radius, radius);
        if x * x + y * y <= radius * radius {
            return [x, y];
        }
    }
}

/// `n` uniform disc samples, returned unmapped.
pub fn sample_disc(radius: f64, n: usize, seed: u64) -> Result<DiscreteMeasure> {
    if n == 0 {
        return Err(Error::Empty("no samples requested"));
    }
    let mut rng = SplitMix64::new(seed);
    let points = (0..n).map(|_| disc_point(&mut rng, radius).to_vec()).collect();
    DiscreteMeasure::uniform(points)
}

/// `n` uniform disc samples mapped through the target map.
pub fn sample_target(radius: f64, n: usize, seed: u64, map: &TargetMap) -> Result<DiscreteMeasure> {
    let disc = sample_disc(radius, n, seed)?;
    let points = disc
        .atoms()
        .iter()
        .map(|x| map.apply(x).map(|y| y.to_vec()))
        .collect::<Result<Vec<_>>>()?;
    DiscreteMeasure::uniform(points)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn target_map_examples() {
        let t = TargetMap::default();
        assert_eq!(t.apply(&[0.5, 0.5]).unwrap(), [0.0, 0.0]);
        let id = [[1.0, 0.0], [0.0, 1.0]];
        let y = target_map(&[1.0, 0.0], &id, &[0.0, 0.0], 2.0).unwrap();
        assert!((y[0] - 1.0 / 3f64.sqrt()).abs() < 1e-15 && y[1] == 0.0);
        assert!(target_map(&[0.0, 0.0], &id, &[0.0, 0.0], 0.0).is_err());
    }

    #[test]
    fn target_map_is_gradient_of_potential() {
        let t = TargetMap::default();
        let h = 1e-6;
        let g = t.apply(&[0.0, 0.0]).unwrap();
        for a in 0..2 {
            let mut p = [0.0, 0.0];
            let mut m = [0.0, 0.0];
            p[a] = h;
            m[a] = -h;
            let fd = (t.potential(&p).unwrap() - t.potential(&m).unwrap()) / (2.0 * h);
            assert!((fd - g[a]).abs() < 1e-8, "{a}: {fd} vs {}", g[a]);
        }
    }

    #[test]
    fn triangulation_counts() {
        let m = disc_triangulation(0.5, 0.04).unwrap();
        assert!((540..=600).contains(&m.len()), "{}", m.len());
        // origin-anchored phase gives exactly 571 vertices
        assert_eq!(m.len(), 571);
        assert!(m.atoms().iter().all(|x| x[0].hypot(x[1]) <= 0.5 + 1e-12));
        let one = disc_triangulation(0.5, 1.0).unwrap();
        assert_eq!(one.atoms(), &[vec![0.0, 0.0]]);
        assert_eq!(one.weights(), &[1.0]);
    }

    #[test]
    fn sampling_is_deterministic() {
        let t = TargetMap::default();
        let a = sample_target(0.5, 50, 9, &t).unwrap();
        assert_eq!(a, sample_target(0.5, 50, 9, &t).unwrap());
        assert_ne!(a, sample_target(0.5, 50, 10, &t).unwrap());
        assert_eq!(sample_target(0.5, 1, 3, &t).unwrap().weights(), &[1.0]);
    }

    #[test]
    fn sample_mean_matches_quadrature() {
        let t = TargetMap::default();
        let s = sample_target(0.5, 1500, 1, &t).unwrap().mean();
        // midpoint rule on a 200×200 grid over the bounding square
        let n = 200;
        let h = 1.0 / n as f64;
        let (mut acc, mut count) = ([0.0; 2], 0usize);
        for i in 0..n {
            for j in 0..n {
                let x = [-0.5 + (i as f64 + 0.5) * h, -0.5 + (j as f64 + 0.5) * h];
                if x[0].hypot(x[1]) <= 0.5 {
                    let y = t.apply(&x).unwrap();
                    acc[0] += y[0];
                    acc[1] += y[1];
                    count += 1;
                }
            }
        }
        for a in 0..2 {
            let q = acc[a] / count as f64;
            assert!((s[a] - q).abs() < 0.05, "{a}: {} vs {q}", s[a]);
        }
    }
}
