//! Spatial discretization of a box domain with homogeneous Dirichlet data.
//!
//! Interior nodes only are stored; the boundary value is identically zero and
//! enters the stencils as ghost values. Along axis `d` with extent `L_d` and
//! `n_d` interior nodes, the spacing is `h_d = L_d/(n_d+1)` and node `i` sits
//! at `(i+1)·h_d`.
//!
//! The discrete operators are chosen as a compatible pair:
//!
//! * Laplacian: the (2·dim+1)-point central stencil with zero ghosts,
//! * gradient: forward differences over all faces, boundary faces included,
//!   each face weighted by the full cell volume Π h_d.
//!
//! With this pairing the summation-by-parts identity
//! `⟨Δf, g⟩ = −⟨∇f, ∇g⟩` holds exactly (to round-off), which is what lets the
//! discrete energy identity track the time integrator's order instead of
//! drifting at spatial order.
//!
//! Lᵖ norms use the midpoint rule with weight Π h_d per node.

use std::fmt;

use serde::{Deserialize, Serialize};

pub const MAX_DIM: usize = 3;

/// Box domain discretization. Immutable; cheap to clone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    dim: usize,
    n: [usize; MAX_DIM],
    extent: [f64; MAX_DIM],
    h: [f64; MAX_DIM],
}

#[derive(Debug, Clone, PartialEq)]
pub enum GridError {
    BadDim(usize),
    TooFewNodes { axis: usize, n: usize },
    BadExtent { axis: usize, extent: f64 },
}

impl fmt::Display for GridError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GridError::BadDim(d) => write!(f, "dimension must be 1, 2 or 3, got {d}"),
            GridError::TooFewNodes { axis, n } => {
                write!(f, "axis {axis}: need at least 3 interior nodes, got {n}")
            }
            GridError::BadExtent { axis, extent } => {
                write!(f, "axis {axis}: extent must be positive and finite, got {extent}")
            }
        }
    }
}

impl std::error::Error for GridError {}

impl Grid {
    pub fn new(extents: &[f64], nodes: &[usize]) -> Result<Self, GridError> {
        let dim = extents.len();
        if dim == 0 || dim > MAX_DIM || nodes.len() != dim {
            return Err(GridError::BadDim(dim.max(nodes.len())));
        }
        let mut n = [1usize; MAX_DIM];
        let mut extent = [1.0f64; MAX_DIM];
        let mut h = [1.0f64; MAX_DIM];
        for d in 0..dim {
            if nodes[d] < 3 {
                return Err(GridError::TooFewNodes { axis: d, n: nodes[d] });
            }
            if !(extents[d].is_finite() && extents[d] > 0.0) {
                return Err(GridError::BadExtent { axis: d, extent: extents[d] });
            }
            n[d] = nodes[d];
            extent[d] = extents[d];
            h[d] = extents[d] / (nodes[d] + 1) as f64;
        }
        Ok(Grid { dim, n, extent, h })
    }

    /// Interval (0, length) with `n` interior nodes.
    pub fn line(length: f64, n: usize) -> Result<Self, GridError> {
        Grid::new(&[length], &[n])
    }

    /// Unit interval (0, 1).
    pub fn unit_line(n: usize) -> Result<Self, GridError> {
        Grid::line(1.0, n)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nodes(&self, axis: usize) -> usize {
        self.n[axis]
    }

    pub fn extent(&self, axis: usize) -> f64 {
        self.extent[axis]
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        self.h[axis]
    }

    pub fn min_spacing(&self) -> f64 {
        self.h[..self.dim].iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// Total number of interior nodes.
    pub fn len(&self) -> usize {
        self.n.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Domain volume |Ω| = Π extents.
    pub fn volume(&self) -> f64 {
        self.extent[..self.dim].iter().product()
    }

    /// Quadrature weight per node, Π h_d.
    pub fn node_weight(&self) -> f64 {
        self.h[..self.dim].iter().product()
    }

    fn strides(&self) -> [usize; MAX_DIM] {
        [self.n[1] * self.n[2], self.n[2], 1]
    }

    /// Physical coordinates of the flat node index.
    pub fn coords(&self, idx: usize) -> [f64; MAX_DIM] {
        let s = self.strides();
        let ix = idx / s[0];
        let iy = (idx % s[0]) / s[1];
        let iz = idx % s[1];
        let mut x = [0.0; MAX_DIM];
        for (d, &i) in [ix, iy, iz].iter().enumerate() {
            x[d] = (i + 1) as f64 * self.h[d];
        }
        x
    }

    /// Sample a function of physical coordinates at every interior node.
    pub fn sample(&self, mut f: impl FnMut(&[f64]) -> f64) -> Field {
        let values = (0..self.len())
            .map(|idx| f(&self.coords(idx)[..self.dim]))
            .collect();
        Field { grid: self.clone(), values }
    }

    pub fn zero_field(&self) -> Field {
        Field { grid: self.clone(), values: vec![0.0; self.len()] }
    }

    /// First Dirichlet Laplacian eigenmode of the box, Π sin(π x_d / L_d),
    /// unnormalized. Used as an optimizer seed and in analytic tests.
    pub fn first_eigenmode(&self) -> Field {
        self.sample(|x| {
            (0..self.dim)
                .map(|d| (std::f64::consts::PI * x[d] / self.extent[d]).sin())
                .product()
        })
    }
}

/// Grid function on the interior nodes, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Grid,
    values: Vec<f64>,
}

impl Field {
    pub fn from_values(grid: &Grid, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), grid.len(), "field length does not match grid");
        Field { grid: grid.clone(), values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    pub fn scale(&self, c: f64) -> Field {
        self.map(|v| c * v)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field {
            grid: self.grid.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip(&self, other: &Field, f: impl Fn(f64, f64) -> f64) -> Field {
        assert_eq!(self.grid, other.grid, "fields live on different grids");
        Field {
            grid: self.grid.clone(),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn add(&self, other: &Field) -> Field {
        self.zip(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Field) -> Field {
        self.zip(other, |a, b| a - b)
    }

    /// self += c · other, in place.
    pub fn axpy(&mut self, c: f64, other: &Field) {
        assert_eq!(self.grid, other.grid, "fields live on different grids");
        for (a, &b) in self.values.iter_mut().zip(&other.values) {
            *a += c * b;
        }
    }
}

/// Second-order central Laplacian with zero Dirichlet ghost values.
/// Exact on componentwise quadratics that vanish on the boundary.
pub fn laplacian(f: &Field) -> Field {
    let g = &f.grid;
    let s = g.strides();
    let v = &f.values;
    let mut out = vec![0.0; v.len()];
    for d in 0..g.dim {
        let inv_h2 = 1.0 / (g.h[d] * g.h[d]);
        let nd = g.n[d];
        let stride = s[d];
        for (idx, o) in out.iter_mut().enumerate() {
            let i = (idx / stride) % nd;
            let center = v[idx];
            let left = if i > 0 { v[idx - stride] } else { 0.0 };
            let right = if i + 1 < nd { v[idx + stride] } else { 0.0 };
            *o += (left - 2.0 * center + right) * inv_h2;
        }
    }
    Field { grid: g.clone(), values: out }
}

/// Midpoint-rule L² norm.
pub fn norm_l2(f: &Field) -> f64 {
    inner_l2(f, f).sqrt()
}

/// Midpoint-rule Lᵠ norm, q ≥ 1.
pub fn norm_lp(f: &Field, q: f64) -> f64 {
    assert!(q >= 1.0, "Lᵠ norm needs q ≥ 1, got {q}");
    let w = f.grid.node_weight();
    let sum: f64 = f.values.iter().map(|v| v.abs().powf(q)).sum();
    (w * sum).powf(1.0 / q)
}

/// ∫ |f|^q dx (no root), q ≥ 1. The source potential and damping dissipation
/// use this directly.
pub fn lp_power(f: &Field, q: f64) -> f64 {
    assert!(q >= 1.0, "Lᵠ norm needs q ≥ 1, got {q}");
    let w = f.grid.node_weight();
    w * f.values.iter().map(|v| v.abs().powf(q)).sum::<f64>()
}

/// Midpoint-rule L² inner product.
pub fn inner_l2(f: &Field, g: &Field) -> f64 {
    assert_eq!(f.grid, g.grid, "fields live on different grids");
    let w = f.grid.node_weight();
    w * f.values.iter().zip(&g.values).map(|(&a, &b)| a * b).sum::<f64>()
}

/// Discrete ⟨∇f, ∇g⟩ via forward differences over all faces, boundary faces
/// included. Pairs exactly with `laplacian` under summation by parts.
pub fn inner_grad(f: &Field, g: &Field) -> f64 {
    assert_eq!(f.grid, g.grid, "fields live on different grids");
    let gr = &f.grid;
    let s = gr.strides();
    let w = gr.node_weight();
    let mut acc = 0.0;
    for d in 0..gr.dim {
        let inv_h = 1.0 / gr.h[d];
        let nd = gr.n[d];
        let stride = s[d];
        for idx in 0..f.values.len() {
            let i = (idx / stride) % nd;
            // face between node i−1 and node i (ghost zero at i = 0)
            let prev_f = if i > 0 { f.values[idx - stride] } else { 0.0 };
            let prev_g = if i > 0 { g.values[idx - stride] } else { 0.0 };
            let df = (f.values[idx] - prev_f) * inv_h;
            let dg = (g.values[idx] - prev_g) * inv_h;
            acc += df * dg;
            // the last face, between node n−1 and the right boundary ghost
            if i + 1 == nd {
                let df = (0.0 - f.values[idx]) * inv_h;
                let dg = (0.0 - g.values[idx]) * inv_h;
                acc += df * dg;
            }
        }
    }
    acc * w
}

/// Discrete ‖∇f‖₂.
pub fn h1_seminorm(f: &Field) -> f64 {
    inner_grad(f, f).sqrt()
}

/// Write a field snapshot as flat CSV: node index, coordinates, value.
pub fn write_field_csv<W: std::io::Write>(f: &Field, out: &mut W) -> std::io::Result<()> {
    let dim = f.grid.dim();
    write!(out, "index")?;
    for d in 0..dim {
        write!(out, ",x{d}")?;
    }
    writeln!(out, ",value")?;
    for (idx, v) in f.values.iter().enumerate() {
        let x = f.grid.coords(idx);
        write!(out, "{idx}")?;
        for coord in x.iter().take(dim) {
            write!(out, ",{coord}")?;
        }
        writeln!(out, ",{v}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn laplacian_exact_on_quadratic() {
        let g = Grid::unit_line(63).unwrap();
        let f = g.sample(|x| x[0] * (1.0 - x[0]));
        let lap = laplacian(&f);
        for &v in lap.values() {
            assert!((v + 2.0).abs() < 1e-10, "expected -2, got {v}");
        }
    }

    #[test]
    fn laplacian_of_zero() {
        let g = Grid::unit_line(17).unwrap();
        let lap = laplacian(&g.zero_field());
        assert!(lap.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn laplacian_eigenmode() {
        let g = Grid::unit_line(255).unwrap();
        let f = g.sample(|x| (PI * x[0]).sin());
        let lap = laplacian(&f);
        // h²π⁴/12 ≈ 1.25e−5 relative at n = 255
        for (l, v) in lap.values().iter().zip(f.values()) {
            assert!((l + PI * PI * v).abs() <= 1e-4 * PI * PI * v.abs().max(1e-3));
        }
    }

    #[test]
    fn eigenmode_norms() {
        let g = Grid::unit_line(255).unwrap();
        let f = g.sample(|x| (PI * x[0]).sin());
        assert!((norm_l2(&f) - (0.5f64).sqrt()).abs() < 1e-4);
        assert!((inner_grad(&f, &f) - PI * PI / 2.0).abs() < 1e-2);
        let n4 = norm_lp(&f, 4.0);
        assert!((n4.powi(4) - 3.0 / 8.0).abs() < 1e-4);
        assert_eq!(norm_lp(&f, 2.0), norm_l2(&f));
        assert!((h1_seminorm(&f).powi(2) - inner_grad(&f, &f)).abs() < 1e-12);
    }

    #[test]
    fn zero_field_norms() {
        let g = Grid::unit_line(31).unwrap();
        let z = g.zero_field();
        assert_eq!(norm_l2(&z), 0.0);
        assert_eq!(norm_lp(&z, 4.0), 0.0);
        assert_eq!(h1_seminorm(&z), 0.0);
    }

    #[test]
    #[should_panic(expected = "q ≥ 1")]
    fn lp_below_one_rejected() {
        let g = Grid::unit_line(7).unwrap();
        norm_lp(&g.zero_field(), 0.5);
    }

    #[test]
    fn grid_validation() {
        assert!(Grid::new(&[1.0], &[2]).is_err());
        assert!(Grid::new(&[0.0], &[8]).is_err());
        assert!(Grid::new(&[], &[]).is_err());
        assert!(Grid::new(&[1.0, 2.0], &[8, 8]).is_ok());
    }

    #[test]
    fn summation_by_parts_2d() {
        let g = Grid::new(&[1.0, 1.5], &[13, 9]).unwrap();
        let f = g.sample(|x| (PI * x[0]).sin() * x[1] * (1.5 - x[1]));
        let q = g.sample(|x| x[0] * (1.0 - x[0]) * (2.0 * PI * x[1] / 1.5).sin());
        let lhs = inner_l2(&laplacian(&f), &q);
        let rhs = -inner_grad(&f, &q);
        assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0), "lhs {lhs} rhs {rhs}");
    }

    #[test]
    fn refinement_is_second_order() {
        // discrete seminorm of a fixed smooth function converges at O(h²)
        let exact = PI * PI / 2.0;
        let mut errs = Vec::new();
        for n in [63usize, 127] {
            let g = Grid::unit_line(n).unwrap();
            let f = g.sample(|x| (PI * x[0]).sin());
            errs.push((inner_grad(&f, &f) - exact).abs());
        }
        let rate = errs[0] / errs[1];
        assert!(rate > 3.5 && rate < 4.5, "rate {rate}");
    }

    proptest! {
        #[test]
        fn sbp_identity_random_fields(seed in 0u64..1000) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let g = Grid::unit_line(33).unwrap();
            let f = g.sample(|_| rng.gen_range(-1.0..1.0));
            let q = g.sample(|_| rng.gen_range(-1.0..1.0));
            let lhs = inner_l2(&laplacian(&f), &q);
            let rhs = -inner_grad(&f, &q);
            prop_assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0));
        }

        #[test]
        fn norm_homogeneity(c in -100.0f64..100.0, seed in 0u64..1000) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let g = Grid::unit_line(21).unwrap();
            let f = g.sample(|_| rng.gen_range(-1.0..1.0));
            let cf = f.scale(c);
            prop_assert!((norm_l2(&cf) - c.abs() * norm_l2(&f)).abs() <= 1e-12 * norm_l2(&cf).max(1e-30));
            prop_assert!((norm_lp(&cf, 3.0) - c.abs() * norm_lp(&f, 3.0)).abs() <= 1e-12 * norm_lp(&cf, 3.0).max(1e-30));
            prop_assert!((h1_seminorm(&cf) - c.abs() * h1_seminorm(&f)).abs() <= 2e-12 * h1_seminorm(&cf).max(1e-30));
        }
    }
}
