use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::descent_value;
use crate::mesh::{admissibility, deform, NodalField, Point, TriMesh, DEFAULT_AREA_FLOOR};
use crate::problems::ShapeFunctional;
use crate::{Error, Result};

/// One step size of a finite-difference check.
#[derive(Debug, Clone, PartialEq)]
pub struct FdRow {
    pub t: f64,
    pub fd: f64,
    pub assembled: f64,
    pub rel_error: f64,
    /// Order against the previous row; `None` for the first row or when an
    /// error is exactly zero.
    pub order: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FdReport {
    pub rows: Vec<FdRow>,
}

impl FdReport {
    pub fn assembled(&self) -> f64 {
        self.rows.first().map_or(0.0, |r| r.assembled)
    }

    /// Relative error at the row whose step is closest to `t`.
    pub fn rel_error_at(&self, t: f64) -> Option<f64> {
        self.rows
            .iter()
            .min_by(|a, b| (a.t.ln() - t.ln()).abs().total_cmp(&(b.t.ln() - t.ln()).abs()))
            .map(|r| r.rel_error)
    }

    /// Order between the largest and the smallest step.
    pub fn observed_order(&self) -> Option<f64> {
        let (a, b) = (self.rows.first()?, self.rows.last()?);
        if self.rows.len() < 2 || a.rel_error <= 0.0 || b.rel_error <= 0.0 || a.t == b.t {
            return None;
        }
        Some((a.rel_error / b.rel_error).ln() / (a.t / b.t).ln())
    }
}

impl fmt::Display for FdReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:>10} {:>22} {:>22} {:>11} {:>7}", "t", "fd_value", "assembled_value", "rel_error", "order")?;
        for r in &self.rows {
            let order = r.order.map_or(String::new(), |o| format!("{o:.3}"));
            writeln!(f, "{:>10.1e} {:>22.14e} {:>22.14e} {:>11.3e} {:>7}", r.t, r.fd, r.assembled, r.rel_error, order)?;
        }
        Ok(())
    }
}

/// Compares `(J((I+tV)Ω) - J((I-tV)Ω)) / 2t` with the assembled `dJ(Ω)[V]`
/// for each `t` in `steps`.
pub fn fd_check<P: ShapeFunctional + ?Sized>(
    problem: &P,
    mesh: &TriMesh,
    v: &NodalField,
    steps: &[f64],
) -> Result<FdReport> {
    if steps.is_empty() || steps.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
        return Err(Error::InvalidInput("finite-difference steps must be positive".into()));
    }
    v.check_mesh(mesh)?;
    let state = problem.solve_state(mesh)?;
    let adjoint = problem.solve_adjoint(mesh, &state)?;
    let dj = problem.shape_derivative(mesh, &state, &adjoint)?;
    let assembled = descent_value(&dj, v)?;

    let perturbed = |t: f64| -> Result<f64> {
        let m = deform(mesh, &v.scaled(t))?;
        if !admissibility(mesh, &m, DEFAULT_AREA_FLOOR)?.admissible {
            return Err(Error::Inadmissible { t });
        }
        problem.evaluate(&m)
    };

    let mut rows: Vec<FdRow> = Vec::with_capacity(steps.len());
    for &t in steps {
        let fd = (perturbed(t)? - perturbed(-t)?) / (2.0 * t);
        let rel_error = (fd - assembled).abs() / assembled.abs().max(f64::MIN_POSITIVE);
        let order = rows.last().and_then(|p| {
            (p.rel_error > 0.0 && rel_error > 0.0 && p.t != t).then(|| (p.rel_error / rel_error).ln() / (p.t / t).ln())
        });
        rows.push(FdRow { t, fd, assembled, rel_error, order });
    }
    Ok(FdReport { rows })
}

/// A seeded low-frequency deformation field multiplied by `weight`, zero on
/// nodes of `fixed_tags`, scaled so that its largest nodal length equals the
/// mesh's bounding-box diagonal.
///
/// The scale only reparametrizes the step `t`; it is chosen large enough that
/// the `O(t²)` truncation error of central differences stays above the
/// roundoff floor of the cost evaluations down to `t = 1e-5`.
pub fn random_smooth_field<S: AsRef<str>>(
    mesh: &TriMesh,
    seed: u64,
    fixed_tags: &[S],
    weight: impl Fn(Point) -> f64,
) -> Result<NodalField> {
    mesh.require_tags(fixed_tags)?;
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for p in mesh.coords() {
        for c in 0..2 {
            lo[c] = lo[c].min(p[c]);
            hi[c] = hi[c].max(p[c]);
        }
    }
    let size = [hi[0] - lo[0], hi[1] - lo[1]];
    let diag = size[0].hypot(size[1]);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // (component, kx, ky, phase, amplitude)
    let modes: Vec<(usize, f64, f64, f64, f64)> = (0..8)
        .map(|i| {
            let kx = rng.random_range(0..=2) as f64;
            let ky = rng.random_range(0..=2) as f64;
            let phase = rng.random_range(0.0..std::f64::consts::TAU);
            let amp = rng.random_range(-1.0..1.0) / (1.0 + kx + ky);
            (i % 2, kx, ky, phase, amp)
        })
        .collect();

    let fixed = mesh.nodes_on_tags(fixed_tags);
    let mut values = vec![0.0; 2 * mesh.n_nodes()];
    for (i, p) in mesh.coords().iter().enumerate() {
        if fixed[i] {
            continue;
        }
        let s = [(p[0] - lo[0]) / size[0], (p[1] - lo[1]) / size[1]];
        let w = weight(*p);
        for &(c, kx, ky, phase, amp) in &modes {
            values[2 * i + c] += w * amp * (std::f64::consts::PI * (kx * s[0] + ky * s[1]) + phase).sin();
        }
    }
    let max = values.chunks(2).map(|v| v[0].hypot(v[1])).fold(0.0, f64::max);
    if max == 0.0 {
        return Err(Error::InvalidInput("random field vanishes identically".into()));
    }
    let scale = diag / max;
    values.iter_mut().for_each(|v| *v *= scale);
    NodalField::from_values(mesh, 2, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::generate_disk;
    use crate::shape::{MetricParams, MuSpec, ShapeDerivative};

    /// `J(Ω) = |Ω|`, whose derivative is `∫ div V`.
    struct Volume(MetricParams);

    impl ShapeFunctional for Volume {
        type State = ();
        type Adjoint = ();

        fn name(&self) -> &str {
            "volume"
        }
        fn metric(&self) -> &MetricParams {
            &self.0
        }
        fn solve_state(&self, _: &TriMesh) -> Result<()> {
            Ok(())
        }
        fn cost(&self, mesh: &TriMesh, _: &()) -> Result<f64> {
            Ok(mesh.total_area())
        }
        fn solve_adjoint(&self, _: &TriMesh, _: &()) -> Result<()> {
            Ok(())
        }
        fn shape_derivative(&self, mesh: &TriMesh, _: &(), _: &()) -> Result<ShapeDerivative> {
            let mut v = vec![0.0; 2 * mesh.n_nodes()];
            for t in 0..mesh.n_triangles() {
                let e = crate::fem::element::p1_element(&mesh.triangle_coords(t));
                for (a, &n) in mesh.triangles()[t].iter().enumerate() {
                    v[2 * n] += e.area * e.grads[a][0];
                    v[2 * n + 1] += e.area * e.grads[a][1];
                }
            }
            ShapeDerivative::new(mesh, v, &self.0.fixed_tags)
        }
    }

    fn volume() -> Volume {
        Volume(MetricParams { lambda: 0.0, mu: MuSpec::Constant(1.0), delta: 1.0, fixed_tags: vec![] })
    }

    #[test]
    fn volume_derivative_of_dilation() {
        let mesh = generate_disk([0.0, 0.0], 1.0, 2000).unwrap();
        let v = NodalField::from_vector_fn(&mesh, |x| x);
        let report = fd_check(&volume(), &mesh, &v, &[1e-3, 1e-4]).unwrap();
        assert!((report.assembled() - 2.0 * mesh.total_area()).abs() < 1e-12);
        assert!((report.assembled() - 2.0 * std::f64::consts::PI).abs() < 0.01);
        // area is quadratic in t, so central differences are exact up to roundoff
        assert!(report.rows.iter().all(|r| r.rel_error < 1e-9));
        assert!(report.to_string().contains("assembled_value"));
    }

    #[test]
    fn fields_are_seeded_and_respect_fixed_nodes() {
        let mesh = generate_disk([0.0, 0.0], 1.0, 500).unwrap();
        let a = random_smooth_field(&mesh, 7, &["outer"], |_| 1.0).unwrap();
        let fixed = mesh.nodes_on_tags(&["outer"]);
        assert!((0..mesh.n_nodes()).all(|i| !fixed[i] || a.vector_at(i) == [0.0, 0.0]));
        let b = random_smooth_field(&mesh, 7, &[] as &[&str], |_| 1.0).unwrap();
        let c = random_smooth_field(&mesh, 7, &[] as &[&str], |_| 1.0).unwrap();
        let d = random_smooth_field(&mesh, 8, &[] as &[&str], |_| 1.0).unwrap();
        assert_eq!(b, c);
        assert_ne!(b, d);
        let max = b.values().chunks(2).map(|v| v[0].hypot(v[1])).fold(0.0, f64::max);
        assert!((max - 8f64.sqrt()).abs() < 0.2);
    }

    #[test]
    fn rejects_bad_steps_and_inadmissible_perturbations() {
        let mesh = generate_disk([0.0, 0.0], 1.0, 200).unwrap();
        let v = random_smooth_field(&mesh, 1, &[] as &[&str], |_| 1.0).unwrap();
        assert!(fd_check(&volume(), &mesh, &v, &[]).is_err());
        assert!(fd_check(&volume(), &mesh, &v, &[-1.0]).is_err());
        assert!(matches!(fd_check(&volume(), &mesh, &v, &[1e3]), Err(Error::Inadmissible { .. })));
        let report = fd_check(&volume(), &mesh, &v, &[1e-2]).unwrap();
        assert!(report.rows[0].order.is_none());
        assert!(report.observed_order().is_none());
    }
}
