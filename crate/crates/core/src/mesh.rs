//! Structured triangulations of the unit square and triangle quadrature.

use crate::error::{Error, Result};
use crate::scalar::Real;
use std::collections::BTreeMap;

/// Tag given to every boundary vertex unless a classifier says otherwise.
pub const DEFAULT_BOUNDARY_TAG: &str = "boundary";

/// Conforming triangulation of `[0,1]²`.
#[derive(Clone, Debug)]
pub struct Mesh<T> {
    n_per_side: usize,
    vertices: Vec<[T; 2]>,
    triangles: Vec<[usize; 3]>,
    boundary_tags: BTreeMap<usize, String>,
}

impl<T: Real> Mesh<T> {
    /// Uniform `n × n` grid of squares, each split along the diagonal from the
    /// lower-left to the upper-right corner. Vertex `(i, j)` has index `j (n+1) + i`.
    pub fn unit_square(n_per_side: usize) -> Result<Self> {
        if n_per_side == 0 {
            return Err(Error::InvalidInput("mesh needs at least one cell per side".into()));
        }
        let n = n_per_side;
        let nv = n + 1;
        let inv = T::one() / T::from_usize_lossy(n);
        let mut vertices = Vec::with_capacity(nv * nv);
        for j in 0..nv {
            for i in 0..nv {
                vertices.push([T::from_usize_lossy(i) * inv, T::from_usize_lossy(j) * inv]);
            }
        }
        let mut triangles = Vec::with_capacity(2 * n * n);
        for j in 0..n {
            for i in 0..n {
                let v00 = j * nv + i;
                let v10 = v00 + 1;
                let v01 = v00 + nv;
                let v11 = v01 + 1;
                triangles.push([v00, v10, v11]);
                triangles.push([v00, v11, v01]);
            }
        }
        let mut boundary_tags = BTreeMap::new();
        for j in 0..nv {
            for i in 0..nv {
                if i == 0 || j == 0 || i == n || j == n {
                    boundary_tags.insert(j * nv + i, DEFAULT_BOUNDARY_TAG.to_string());
                }
            }
        }
        Ok(Self {
            n_per_side,
            vertices,
            triangles,
            boundary_tags,
        })
    }

    /// Re-tags boundary vertices using a classifier on their coordinates.
    pub fn with_boundary_classifier(mut self, classify: impl Fn([T; 2]) -> String) -> Self {
        for (v, tag) in self.boundary_tags.iter_mut() {
            *tag = classify(self.vertices[*v]);
        }
        self
    }

    pub fn n_per_side(&self) -> usize {
        self.n_per_side
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn vertices(&self) -> &[[T; 2]] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn vertex(&self, v: usize) -> [T; 2] {
        self.vertices[v]
    }

    pub fn triangle_coords(&self, k: usize) -> [[T; 2]; 3] {
        let t = self.triangles[k];
        [self.vertices[t[0]], self.vertices[t[1]], self.vertices[t[2]]]
    }

    /// Signed area, positive for counter-clockwise triangles.
    pub fn signed_area(&self, k: usize) -> T {
        let [a, b, c] = self.triangle_coords(k);
        ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1])) * T::lit(0.5)
    }

    /// Longest edge of triangle `k`.
    pub fn diameter(&self, k: usize) -> T {
        let [a, b, c] = self.triangle_coords(k);
        let d = |p: [T; 2], q: [T; 2]| ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt();
        d(a, b).max(d(b, c)).max(d(c, a))
    }

    /// Mesh size `max_K h_K`.
    pub fn h(&self) -> T {
        (0..self.n_triangles()).fold(T::zero(), |acc, k| acc.max(self.diameter(k)))
    }

    pub fn is_boundary(&self, v: usize) -> bool {
        self.boundary_tags.contains_key(&v)
    }

    pub fn boundary_tag(&self, v: usize) -> Option<&str> {
        self.boundary_tags.get(&v).map(String::as_str)
    }

    pub fn boundary_tags(&self) -> &BTreeMap<usize, String> {
        &self.boundary_tags
    }

    /// Sorted list of boundary vertex indices.
    pub fn boundary_vertices(&self) -> Vec<usize> {
        self.boundary_tags.keys().copied().collect()
    }

    pub fn interior_vertices(&self) -> Vec<usize> {
        (0..self.n_vertices()).filter(|v| !self.is_boundary(*v)).collect()
    }

    /// Distinct tag names in use.
    pub fn tag_names(&self) -> Vec<String> {
        let mut names: Vec<String> = self.boundary_tags.values().cloned().collect();
        names.sort();
        names.dedup();
        names
    }

    /// Index of the grid vertex `(i, j)`.
    pub fn grid_index(&self, i: usize, j: usize) -> usize {
        j * (self.n_per_side + 1) + i
    }
}

/// Symmetric rule on the reference triangle `{(s,t): s,t ≥ 0, s+t ≤ 1}`.
///
/// Points are barycentric `(λ₁, λ₂, λ₃)` and the weights sum to the reference
/// area `1/2`.
#[derive(Clone, Debug)]
pub struct QuadratureRule<T> {
    pub degree: usize,
    pub points: Vec<[T; 3]>,
    pub weights: Vec<T>,
}

impl<T: Real> QuadratureRule<T> {
    /// Smallest built-in rule exact for polynomials of total degree `degree`.
    pub fn of_degree(degree: usize) -> Result<Self> {
        match degree {
            0 | 1 => Ok(Self::centroid()),
            2 => Ok(Self::edge_midpoints()),
            3 | 4 => Ok(Self::dunavant4()),
            _ => Err(Error::Unsupported(format!("quadrature of degree {degree}"))),
        }
    }

    fn centroid() -> Self {
        let third = T::one() / T::lit(3.0);
        Self {
            degree: 1,
            points: vec![[third, third, third]],
            weights: vec![T::lit(0.5)],
        }
    }

    fn edge_midpoints() -> Self {
        let h = T::lit(0.5);
        let z = T::zero();
        let w = T::one() / T::lit(6.0);
        Self {
            degree: 2,
            points: vec![[h, h, z], [z, h, h], [h, z, h]],
            weights: vec![w; 3],
        }
    }

    /// Six-point rule exact up to degree four.
    pub fn dunavant4() -> Self {
        let a1 = T::lit(0.445_948_490_915_965);
        let w1 = T::lit(0.223_381_589_678_011 * 0.5);
        let a2 = T::lit(0.091_576_213_509_771);
        let w2 = T::lit(0.109_951_743_655_322 * 0.5);
        let b1 = T::one() - a1 - a1;
        let b2 = T::one() - a2 - a2;
        Self {
            degree: 4,
            points: vec![[a1, a1, b1], [a1, b1, a1], [b1, a1, a1], [a2, a2, b2], [a2, b2, a2], [b2, a2, a2]],
            weights: vec![w1, w1, w1, w2, w2, w2],
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Reference coordinates `(s, t) = (λ₂, λ₃)` of point `q`.
    pub fn reference_point(&self, q: usize) -> [T; 2] {
        [self.points[q][1], self.points[q][2]]
    }
}
