//! Tensor grid on a rectangle, interior-node fields, quadrature, and the
//! five-point Laplacian / thirteen-point biharmonic operators.
//!
//! The rectangle `(0, a) × (0, b)` is discretized with `nx × ny` interior
//! nodes, `hx = a/(nx+1)`, `hy = b/(ny+1)`. Under Navier conditions
//! (`u = Δu = 0` on the boundary) both the Laplacian and the biharmonic
//! operator close on interior values alone, so boundary nodes are never
//! stored. Fields are kept in row-major order: index `(i, j)` (1-based,
//! `i` along x) lives at `(j-1)·nx + (i-1)`.

use crate::accum::CompensatedSum;
use crate::error::{CoreError, Result};
use crate::sparse::SparseOperator;

/// Geometry of the discretization. Cheap to copy; two fields agree on a grid
/// iff their `Grid2D`s compare equal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid2D {
    a: f64,
    b: f64,
    nx: usize,
    ny: usize,
    hx: f64,
    hy: f64,
}

impl Grid2D {
    pub fn new(a: f64, b: f64, nx: usize, ny: usize) -> Result<Self> {
        if !(a.is_finite() && b.is_finite()) || a <= 0.0 || b <= 0.0 {
            return Err(CoreError::InvalidArgument(format!(
                "rectangle extents must be positive and finite, got a={a}, b={b}"
            )));
        }
        if nx == 0 || ny == 0 {
            return Err(CoreError::InvalidArgument(format!(
                "interior node counts must be positive, got nx={nx}, ny={ny}"
            )));
        }
        Ok(Self {
            a,
            b,
            nx,
            ny,
            hx: a / (nx + 1) as f64,
            hy: b / (ny + 1) as f64,
        })
    }

    pub fn extent_x(&self) -> f64 {
        self.a
    }

    pub fn extent_y(&self) -> f64 {
        self.b
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn hx(&self) -> f64 {
        self.hx
    }

    pub fn hy(&self) -> f64 {
        self.hy
    }

    /// Number of interior nodes.
    pub fn node_count(&self) -> usize {
        self.nx * self.ny
    }

    /// Quadrature weight of one node.
    pub fn cell_area(&self) -> f64 {
        self.hx * self.hy
    }

    /// x-coordinate of interior column `i ∈ 1..=nx`.
    pub fn x(&self, i: usize) -> f64 {
        i as f64 * self.hx
    }

    /// y-coordinate of interior row `j ∈ 1..=ny`.
    pub fn y(&self, j: usize) -> f64 {
        j as f64 * self.hy
    }

    /// Flat index of interior node `(i, j)`, both 1-based.
    pub fn index(&self, i: usize, j: usize) -> usize {
        debug_assert!(i >= 1 && i <= self.nx && j >= 1 && j <= self.ny);
        (j - 1) * self.nx + (i - 1)
    }

    /// Inverse of [`Grid2D::index`].
    pub fn multi_index(&self, idx: usize) -> (usize, usize) {
        debug_assert!(idx < self.node_count());
        (idx % self.nx + 1, idx / self.nx + 1)
    }
}

/// Builds the grid for a rectangle `(0,a) × (0,b)` with `nx × ny` interior
/// nodes.
pub fn build_grid(a: f64, b: f64, nx: usize, ny: usize) -> Result<Grid2D> {
    Grid2D::new(a, b, nx, ny)
}

/// Scalar values on the interior nodes of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Grid2D,
    values: Vec<f64>,
}

impl Field {
    pub fn zeros(grid: Grid2D) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.node_count()],
        }
    }

    pub fn constant(grid: Grid2D, c: f64) -> Self {
        Self {
            grid,
            values: vec![c; grid.node_count()],
        }
    }

    /// Samples `f(x, y)` at every interior node.
    pub fn from_fn(grid: Grid2D, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.node_count());
        for j in 1..=grid.ny {
            for i in 1..=grid.nx {
                values.push(f(grid.x(i), grid.y(j)));
            }
        }
        Self { grid, values }
    }

    /// Wraps raw values (row-major). Rejects wrong lengths and non-finite
    /// entries.
    pub fn from_values(grid: Grid2D, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.node_count() {
            return Err(CoreError::GridMismatch(format!(
                "expected {} values, got {}",
                grid.node_count(),
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(CoreError::InvalidArgument(format!(
                "non-finite value at flat index {pos}"
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> Grid2D {
        self.grid
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Value at interior node `(i, j)`, 1-based.
    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.index(i, j)]
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Field, f: impl Fn(f64, f64) -> f64) -> Result<Field> {
        check_same_grid(self, other)?;
        Ok(Field {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&u, &v)| f(u, v))
                .collect(),
        })
    }

    pub fn scaled(&self, c: f64) -> Field {
        self.map(|v| c * v)
    }

    /// `self + c · other`.
    pub fn add_scaled(&self, c: f64, other: &Field) -> Result<Field> {
        self.zip_map(other, |u, v| u + c * v)
    }

    /// Positive part raised to a power: `max(v, 0)^p` nodewise.
    pub fn pos_part_pow(&self, p: f64) -> Field {
        self.map(|v| if v > 0.0 { v.powf(p) } else { 0.0 })
    }

    /// Serializes to CSV with header `i,j,x,y,value`, row-major. Values use
    /// the shortest round-trip decimal form, so write→read is bit-exact.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(32 * self.len() + 16);
        out.push_str("i,j,x,y,value\n");
        for j in 1..=self.grid.ny {
            for i in 1..=self.grid.nx {
                let v = self.values[self.grid.index(i, j)];
                out.push_str(&format!("{i},{j},{},{},{v}\n", self.grid.x(i), self.grid.y(j)));
            }
        }
        out
    }

    /// Parses the CSV produced by [`Field::to_csv`], validating shape,
    /// coordinates, and finiteness against `grid`.
    pub fn from_csv(grid: Grid2D, text: &str) -> Result<Field> {
        let mut lines = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'));
        match lines.next() {
            Some(h) if h.trim() == "i,j,x,y,value" => {}
            other => {
                return Err(CoreError::Parse(format!(
                    "expected field header 'i,j,x,y,value', got {other:?}"
                )))
            }
        }
        let coord_tol = 1e-9 * (grid.a + grid.b);
        let mut values = vec![f64::NAN; grid.node_count()];
        let mut seen = vec![false; grid.node_count()];
        let mut rows = 0usize;
        for line in lines {
            let parts: Vec<&str> = line.trim().split(',').collect();
            if parts.len() != 5 {
                return Err(CoreError::Parse(format!(
                    "expected 5 comma-separated columns, got {} in line '{line}'"
                , parts.len())));
            }
            let i: usize = parts[0]
                .parse()
                .map_err(|_| CoreError::Parse(format!("bad i index '{}'", parts[0])))?;
            let j: usize = parts[1]
                .parse()
                .map_err(|_| CoreError::Parse(format!("bad j index '{}'", parts[1])))?;
            if i < 1 || i > grid.nx || j < 1 || j > grid.ny {
                return Err(CoreError::Parse(format!(
                    "node ({i},{j}) outside {}x{} interior",
                    grid.nx, grid.ny
                )));
            }
            let x: f64 = parts[2]
                .parse()
                .map_err(|_| CoreError::Parse(format!("bad x coordinate '{}'", parts[2])))?;
            let y: f64 = parts[3]
                .parse()
                .map_err(|_| CoreError::Parse(format!("bad y coordinate '{}'", parts[3])))?;
            if (x - grid.x(i)).abs() > coord_tol || (y - grid.y(j)).abs() > coord_tol {
                return Err(CoreError::Parse(format!(
                    "coordinates ({x},{y}) do not match node ({i},{j})"
                )));
            }
            let v: f64 = parts[4]
                .parse()
                .map_err(|_| CoreError::Parse(format!("bad value '{}'", parts[4])))?;
            if !v.is_finite() {
                return Err(CoreError::Parse(format!("non-finite value at ({i},{j})")));
            }
            let idx = grid.index(i, j);
            if seen[idx] {
                return Err(CoreError::Parse(format!("duplicate node ({i},{j})")));
            }
            seen[idx] = true;
            values[idx] = v;
            rows += 1;
        }
        if rows != grid.node_count() {
            return Err(CoreError::Parse(format!(
                "expected {} data rows, got {rows}",
                grid.node_count()
            )));
        }
        Ok(Field { grid, values })
    }
}

pub(crate) fn check_same_grid(u: &Field, v: &Field) -> Result<()> {
    if u.grid != v.grid {
        return Err(CoreError::GridMismatch(format!(
            "fields live on different grids: {:?} vs {:?}",
            u.grid, v.grid
        )));
    }
    Ok(())
}

/// Discrete L² pairing: `hx·hy · Σ u·v` over interior nodes (compensated
/// accumulation).
pub fn integrate(u: &Field, v: &Field) -> Result<f64> {
    check_same_grid(u, v)?;
    let mut acc = CompensatedSum::new();
    for (&x, &y) in u.values.iter().zip(&v.values) {
        acc.add_prod(x, y);
    }
    Ok(u.grid.cell_area() * acc.value())
}

/// Quadrature Lᵖ norm: `(hx·hy · Σ |u|^q)^(1/q)` for `1 ≤ q < ∞`, sup-norm
/// for `q = ∞`.
pub fn lp_norm(u: &Field, q: f64) -> Result<f64> {
    if q.is_nan() || q < 1.0 {
        return Err(CoreError::InvalidArgument(format!(
            "lp_norm exponent must satisfy q >= 1, got {q}"
        )));
    }
    if q.is_infinite() {
        return Ok(u.sup_norm());
    }
    let mut acc = CompensatedSum::new();
    if q == 1.0 {
        for &v in &u.values {
            acc.add(v.abs());
        }
        return Ok(u.grid.cell_area() * acc.value());
    }
    if q == 2.0 {
        for &v in &u.values {
            acc.add_prod(v, v);
        }
        return Ok((u.grid.cell_area() * acc.value()).sqrt());
    }
    for &v in &u.values {
        acc.add(v.abs().powf(q));
    }
    Ok((u.grid.cell_area() * acc.value()).powf(1.0 / q))
}

/// `u / ‖u‖_{L²}`. Errors on the zero field.
pub fn normalize_l2(u: &Field) -> Result<Field> {
    let norm = lp_norm(u, 2.0)?;
    if norm == 0.0 {
        return Err(CoreError::InvalidArgument(
            "cannot L²-normalize the zero field".into(),
        ));
    }
    Ok(u.scaled(1.0 / norm))
}

/// Samples the `(k, l)` separated sine mode `sin(kπx/a)·sin(lπy/b)`, the
/// exact eigenvector family of the discrete Dirichlet Laplacian.
pub fn sine_mode_field(grid: Grid2D, k: usize, l: usize) -> Result<Field> {
    if k == 0 || l == 0 {
        return Err(CoreError::InvalidArgument(
            "sine mode numbers must be positive".into(),
        ));
    }
    let (ka, lb) = (k as f64, l as f64);
    Ok(Field::from_fn(grid, move |x, y| {
        let sx = (std::f64::consts::PI * ka * x / grid.a).sin();
        let sy = (std::f64::consts::PI * lb * y / grid.b).sin();
        sx * sy
    }))
}

/// Five-point Laplacian `L ≈ -Δ` with Dirichlet conditions, interior nodes
/// only:
///
/// ```text
///                -1/hy²
///    -1/hx²   2/hx²+2/hy²   -1/hx²
///                -1/hy²
/// ```
///
/// Symmetric positive definite; eigenvalues
/// `(4/hx²)sin²(kπ/(2(nx+1))) + (4/hy²)sin²(lπ/(2(ny+1)))`.
pub fn laplacian_matrix(grid: Grid2D) -> SparseOperator {
    let n = grid.node_count();
    let cx = 1.0 / (grid.hx * grid.hx);
    let cy = 1.0 / (grid.hy * grid.hy);
    let diag = 2.0 * cx + 2.0 * cy;
    let mut rows: Vec<Vec<(usize, f64)>> = Vec::with_capacity(n);
    for j in 1..=grid.ny {
        for i in 1..=grid.nx {
            let idx = grid.index(i, j);
            let mut row = Vec::with_capacity(5);
            if j > 1 {
                row.push((idx - grid.nx, -cy));
            }
            if i > 1 {
                row.push((idx - 1, -cx));
            }
            row.push((idx, diag));
            if i < grid.nx {
                row.push((idx + 1, -cx));
            }
            if j < grid.ny {
                row.push((idx + grid.nx, -cy));
            }
            rows.push(row);
        }
    }
    SparseOperator::from_rows(n, rows)
        .and_then(SparseOperator::into_symmetric)
        .expect("five-point Laplacian assembly is structurally symmetric")
}

/// Discrete biharmonic operator under Navier conditions: the exact sparse
/// product `B = L·L`. Interior rows away from the boundary carry the
/// classical 13-point bilaplacian stencil.
pub fn biharmonic_matrix(grid: Grid2D) -> SparseOperator {
    let l = laplacian_matrix(grid);
    l.matmul(&l)
        .and_then(SparseOperator::into_symmetric)
        .expect("square of the symmetric Laplacian is symmetric")
}
