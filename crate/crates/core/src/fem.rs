//! P1 finite element assembly with optional streamline-upwind test functions.
//!
//! Matrices follow the row-is-test convention `A[i][j] = B(φ_j, φ_i)`.

use crate::error::{Error, Result};
use crate::linalg::CsrMatrix;
use crate::mesh::{Mesh, QuadratureRule};
use crate::scalar::Real;
use std::collections::BTreeMap;

/// Scalar field on the physical domain.
pub type ScalarField<'a, T> = &'a dyn Fn([T; 2]) -> T;
/// Vector field on the physical domain.
pub type VectorField<'a, T> = &'a dyn Fn([T; 2]) -> [T; 2];

/// Geometry of one triangle, precomputed once per mesh.
#[derive(Clone, Debug)]
pub struct ElementGeometry<T> {
    pub vertices: [usize; 3],
    pub area: T,
    pub diameter: T,
    /// Gradients of the three barycentric basis functions.
    pub grads: [[T; 2]; 3],
    /// Physical quadrature points.
    pub points: Vec<[T; 2]>,
    /// Physical quadrature weights (sum to `area`).
    pub weights: Vec<T>,
}

/// Continuous piecewise-linear space on a mesh together with its quadrature.
#[derive(Clone, Debug)]
pub struct P1Space<T> {
    pub mesh: Mesh<T>,
    pub quad: QuadratureRule<T>,
    pub elements: Vec<ElementGeometry<T>>,
}

impl<T: Real> P1Space<T> {
    pub fn new(mesh: Mesh<T>, quad: QuadratureRule<T>) -> Result<Self> {
        let mut elements = Vec::with_capacity(mesh.n_triangles());
        for k in 0..mesh.n_triangles() {
            let area = mesh.signed_area(k);
            if !(area > T::zero()) {
                return Err(Error::InvalidInput(format!("triangle {k} has non-positive area")));
            }
            let [a, b, c] = mesh.triangle_coords(k);
            let two_area = area + area;
            let grads = [
                [(b[1] - c[1]) / two_area, (c[0] - b[0]) / two_area],
                [(c[1] - a[1]) / two_area, (a[0] - c[0]) / two_area],
                [(a[1] - b[1]) / two_area, (b[0] - a[0]) / two_area],
            ];
            let points = quad
                .points
                .iter()
                .map(|l| {
                    [
                        l[0] * a[0] + l[1] * b[0] + l[2] * c[0],
                        l[0] * a[1] + l[1] * b[1] + l[2] * c[1],
                    ]
                })
                .collect();
            let weights = quad.weights.iter().map(|w| *w * two_area).collect();
            elements.push(ElementGeometry {
                vertices: mesh.triangles()[k],
                area,
                diameter: mesh.diameter(k),
                grads,
                points,
                weights,
            });
        }
        Ok(Self { mesh, quad, elements })
    }

    pub fn ndofs(&self) -> usize {
        self.mesh.n_vertices()
    }

    pub fn n_elements(&self) -> usize {
        self.elements.len()
    }

    /// Value of basis function `a` of any element at quadrature point `q`.
    #[inline]
    pub fn basis(&self, q: usize, a: usize) -> T {
        self.quad.points[q][a]
    }

    /// Element diameters `h_K`.
    pub fn diameters(&self) -> Vec<T> {
        self.elements.iter().map(|e| e.diameter).collect()
    }

    /// Nodal interpolant of `f`.
    pub fn interpolate(&self, f: impl Fn([T; 2]) -> T) -> Vec<T> {
        self.mesh.vertices().iter().map(|x| f(*x)).collect()
    }

    /// Values of a nodal vector at the quadrature points of element `k`.
    pub fn eval_at_quadrature(&self, k: usize, nodal: &[T], out: &mut [T]) {
        let v = self.elements[k].vertices;
        for (q, o) in out.iter_mut().enumerate() {
            *o = self.basis(q, 0) * nodal[v[0]] + self.basis(q, 1) * nodal[v[1]] + self.basis(q, 2) * nodal[v[2]];
        }
    }

    /// Gradient of a nodal vector on element `k` (constant for P1).
    pub fn grad_on(&self, k: usize, nodal: &[T]) -> [T; 2] {
        let e = &self.elements[k];
        let mut g = [T::zero(); 2];
        for a in 0..3 {
            g[0] += e.grads[a][0] * nodal[e.vertices[a]];
            g[1] += e.grads[a][1] * nodal[e.vertices[a]];
        }
        g
    }

    /// Generic assembly. The kernel fills `local[a][b] = B(φ_b, φ_a)` for element `k`.
    pub fn assemble<F>(&self, mut kernel: F) -> Result<CsrMatrix<T>>
    where
        F: FnMut(usize, &ElementGeometry<T>, &mut [[T; 3]; 3]),
    {
        let mut triplets = Vec::with_capacity(9 * self.elements.len());
        for (k, e) in self.elements.iter().enumerate() {
            let mut local = [[T::zero(); 3]; 3];
            kernel(k, e, &mut local);
            for a in 0..3 {
                for b in 0..3 {
                    if !local[a][b].is_finite() {
                        return Err(Error::NonFinite(format!("element matrix of triangle {k}")));
                    }
                    triplets.push((e.vertices[a], e.vertices[b], local[a][b]));
                }
            }
        }
        CsrMatrix::from_triplets(self.ndofs(), self.ndofs(), &triplets)
    }

    /// Generic load assembly. The kernel fills `local[a] = F(φ_a)`.
    pub fn assemble_vector<F>(&self, mut kernel: F) -> Result<Vec<T>>
    where
        F: FnMut(usize, &ElementGeometry<T>, &mut [T; 3]),
    {
        let mut out = vec![T::zero(); self.ndofs()];
        for (k, e) in self.elements.iter().enumerate() {
            let mut local = [T::zero(); 3];
            kernel(k, e, &mut local);
            for a in 0..3 {
                if !local[a].is_finite() {
                    return Err(Error::NonFinite(format!("element load of triangle {k}")));
                }
                out[e.vertices[a]] += local[a];
            }
        }
        Ok(out)
    }

    fn check_delta(&self, delta: &[T]) -> Result<()> {
        if delta.len() != self.n_elements() {
            return Err(Error::DimensionMismatch {
                what: "stabilisation parameters",
                expected: self.n_elements(),
                found: delta.len(),
            });
        }
        if let Some(k) = delta.iter().position(|d| !d.is_finite() || *d < T::zero()) {
            return Err(Error::InvalidInput(format!(
                "stabilisation parameter of triangle {k} must be finite and non-negative"
            )));
        }
        Ok(())
    }

    pub fn mass(&self) -> Result<CsrMatrix<T>> {
        self.reaction(&|_| T::one())
    }

    pub fn stiffness(&self) -> Result<CsrMatrix<T>> {
        self.assemble(|_, e, local| {
            for a in 0..3 {
                for b in 0..3 {
                    local[a][b] = e.area * (e.grads[a][0] * e.grads[b][0] + e.grads[a][1] * e.grads[b][1]);
                }
            }
        })
    }

    /// `(c φ_j, φ_i)`
    pub fn reaction(&self, c: ScalarField<'_, T>) -> Result<CsrMatrix<T>> {
        self.assemble(|_, e, local| {
            for (q, (x, w)) in e.points.iter().zip(&e.weights).enumerate() {
                let cw = c(*x) * *w;
                for a in 0..3 {
                    for b in 0..3 {
                        local[a][b] += cw * self.basis(q, a) * self.basis(q, b);
                    }
                }
            }
        })
    }

    /// `(b·∇φ_j, φ_i)`
    pub fn convection(&self, b: VectorField<'_, T>) -> Result<CsrMatrix<T>> {
        self.assemble(|_, e, local| {
            for (q, (x, w)) in e.points.iter().zip(&e.weights).enumerate() {
                let bx = b(*x);
                for bb in 0..3 {
                    let adv = (bx[0] * e.grads[bb][0] + bx[1] * e.grads[bb][1]) * *w;
                    for a in 0..3 {
                        local[a][bb] += adv * self.basis(q, a);
                    }
                }
            }
        })
    }

    /// `Σ_K δ_K (φ_j, b̄·∇φ_i)_K`
    pub fn supg_mass(&self, b_test: VectorField<'_, T>, delta: &[T]) -> Result<CsrMatrix<T>> {
        self.supg_reaction(&|_| T::one(), b_test, delta)
    }

    /// `Σ_K δ_K (b·∇φ_j, b̄·∇φ_i)_K`
    pub fn supg_convection(
        &self,
        b_trial: VectorField<'_, T>,
        b_test: VectorField<'_, T>,
        delta: &[T],
    ) -> Result<CsrMatrix<T>> {
        self.check_delta(delta)?;
        self.assemble(|k, e, local| {
            if delta[k] == T::zero() {
                return;
            }
            for (x, w) in e.points.iter().zip(&e.weights) {
                let bt = b_trial(*x);
                let bs = b_test(*x);
                let dw = delta[k] * *w;
                for a in 0..3 {
                    let test = bs[0] * e.grads[a][0] + bs[1] * e.grads[a][1];
                    for b in 0..3 {
                        let trial = bt[0] * e.grads[b][0] + bt[1] * e.grads[b][1];
                        local[a][b] += dw * trial * test;
                    }
                }
            }
        })
    }

    /// `Σ_K δ_K (c φ_j, b̄·∇φ_i)_K`
    pub fn supg_reaction(
        &self,
        c: ScalarField<'_, T>,
        b_test: VectorField<'_, T>,
        delta: &[T],
    ) -> Result<CsrMatrix<T>> {
        self.check_delta(delta)?;
        self.assemble(|k, e, local| {
            if delta[k] == T::zero() {
                return;
            }
            for (q, (x, w)) in e.points.iter().zip(&e.weights).enumerate() {
                let bs = b_test(*x);
                let cw = delta[k] * c(*x) * *w;
                for a in 0..3 {
                    let test = bs[0] * e.grads[a][0] + bs[1] * e.grads[a][1];
                    for b in 0..3 {
                        local[a][b] += cw * self.basis(q, b) * test;
                    }
                }
            }
        })
    }

    /// `(g, φ_i + δ_K b̄·∇φ_i)`
    pub fn load(&self, g: ScalarField<'_, T>, b_test: VectorField<'_, T>, delta: &[T]) -> Result<Vec<T>> {
        self.check_delta(delta)?;
        self.assemble_vector(|k, e, local| {
            for (q, (x, w)) in e.points.iter().zip(&e.weights).enumerate() {
                let gw = g(*x) * *w;
                let bs = if delta[k] == T::zero() { [T::zero(); 2] } else { b_test(*x) };
                for a in 0..3 {
                    let test = bs[0] * e.grads[a][0] + bs[1] * e.grads[a][1];
                    local[a] += gw * (self.basis(q, a) + delta[k] * test);
                }
            }
        })
    }
}

/// Mean-coefficient operator blocks shared by all samples.
#[derive(Clone, Debug)]
pub struct FemBlocks<T> {
    pub mass: CsrMatrix<T>,
    pub stiffness: CsrMatrix<T>,
    pub convection: CsrMatrix<T>,
    pub supg_mass: CsrMatrix<T>,
    pub supg_conv: CsrMatrix<T>,
    pub reaction: CsrMatrix<T>,
    pub supg_reaction: CsrMatrix<T>,
    pub delta: Vec<T>,
}

/// Assembles every block for advection `b` (used on both sides of the streamline
/// terms), reaction `c̄` and stabilisation parameters `δ`.
pub fn assemble_blocks<T: Real>(
    space: &P1Space<T>,
    b: VectorField<'_, T>,
    c_bar: ScalarField<'_, T>,
    delta: &[T],
) -> Result<FemBlocks<T>> {
    Ok(FemBlocks {
        mass: space.mass()?,
        stiffness: space.stiffness()?,
        convection: space.convection(b)?,
        supg_mass: space.supg_mass(b, delta)?,
        supg_conv: space.supg_convection(b, b, delta)?,
        reaction: space.reaction(c_bar)?,
        supg_reaction: space.supg_reaction(c_bar, b, delta)?,
        delta: delta.to_vec(),
    })
}

/// Nodal Dirichlet data: which vertices are fixed and to what value.
#[derive(Clone, Debug)]
pub struct Dirichlet<T> {
    pub constrained: Vec<bool>,
    pub values: Vec<T>,
}

impl<T: Real> Dirichlet<T> {
    /// Tags absent from `by_tag` get the value zero. Unknown tags are an error.
    pub fn new(mesh: &Mesh<T>, by_tag: &BTreeMap<String, T>) -> Result<Self> {
        let names = mesh.tag_names();
        if let Some(bad) = by_tag.keys().find(|k| !names.contains(k)) {
            return Err(Error::UnknownBoundaryTag(bad.clone()));
        }
        let mut constrained = vec![false; mesh.n_vertices()];
        let mut values = vec![T::zero(); mesh.n_vertices()];
        for (v, tag) in mesh.boundary_tags() {
            constrained[*v] = true;
            values[*v] = by_tag.get(tag).copied().unwrap_or_else(T::zero);
        }
        Ok(Self { constrained, values })
    }

    pub fn homogeneous(mesh: &Mesh<T>) -> Self {
        Self::new(mesh, &BTreeMap::new()).expect("no tags to validate")
    }

    pub fn is_homogeneous(&self) -> bool {
        self.values.iter().all(|v| *v == T::zero())
    }

    /// Identity rows and columns on constrained vertices.
    pub fn constrain_matrix(&self, a: &CsrMatrix<T>) -> CsrMatrix<T> {
        a.constrain_symmetric(&self.constrained)
    }

    /// Adjusts `rhs` for the column elimination performed by [`Self::constrain_matrix`].
    /// `a` is the unconstrained matrix. With `homogeneous` the prescribed values are zero.
    pub fn constrain_rhs(&self, a: &CsrMatrix<T>, rhs: &mut [T], homogeneous: bool) {
        if !homogeneous {
            for (i, r) in rhs.iter_mut().enumerate() {
                if self.constrained[i] {
                    continue;
                }
                let (cols, vals) = a.row(i);
                for (c, v) in cols.iter().zip(vals) {
                    if self.constrained[*c] {
                        *r -= *v * self.values[*c];
                    }
                }
            }
        }
        for (i, r) in rhs.iter_mut().enumerate() {
            if self.constrained[i] {
                *r = if homogeneous { T::zero() } else { self.values[i] };
            }
        }
    }
}

/// Imposes boundary values on `(matrix, rhs)` by identity rows and column elimination.
pub fn apply_dirichlet<T: Real>(
    matrix: &CsrMatrix<T>,
    rhs: &[T],
    mesh: &Mesh<T>,
    boundary_values: &BTreeMap<String, T>,
) -> Result<(CsrMatrix<T>, Vec<T>)> {
    if rhs.len() != matrix.nrows() {
        return Err(Error::DimensionMismatch {
            what: "right-hand side",
            expected: matrix.nrows(),
            found: rhs.len(),
        });
    }
    let bc = Dirichlet::new(mesh, boundary_values)?;
    let mut b = rhs.to_vec();
    bc.constrain_rhs(matrix, &mut b, false);
    Ok((bc.constrain_matrix(matrix), b))
}
