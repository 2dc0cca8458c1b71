//! Small-strain plane mechanics on quadratic triangles: shape functions,
//! quadrature, assembly and the Newton-Raphson solver.

mod newton;
mod quadrature;
pub mod sparse;

pub use newton::{solve_newton, DirichletBc, NewtonOptions, NewtonReport, NewtonSolution};
pub use quadrature::QuadratureRule;
pub use sparse::{reverse_cuthill_mckee, CsrMatrix, ProfileLu};

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::mesh::{Mesh, Point};

/// Voigt vector `(xx, yy, xy)`; shear strains are engineering strains.
pub type Voigt = Vector3<f64>;
/// Tangent `dσ/dε` in Voigt form.
pub type Tangent = Matrix3<f64>;

pub const IPS_PER_ELEMENT: usize = 3;
const EDOF: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstitutiveResponse {
    pub stress: Voigt,
    pub tangent: Tangent,
}

impl ConstitutiveResponse {
    /// `w·a + (1 − w)·b` for both stress and tangent.
    pub fn blend(w: f64, a: &Self, b: &Self) -> Self {
        ConstitutiveResponse {
            stress: a.stress * w + b.stress * (1.0 - w),
            tangent: a.tangent * w + b.tangent * (1.0 - w),
        }
    }
}

/// Geometry of one integration point of a straight-sided T6 element.
#[derive(Debug, Clone, Copy)]
pub struct IpGeometry {
    /// Shape-function gradients `[dN/dx, dN/dy]` for the six nodes.
    pub dn: [[f64; 2]; 6],
    /// Physical quadrature weight (area share).
    pub weight: f64,
    pub bary: [f64; 3],
    pub position: Point,
}

/// Gradients of the barycentric coordinates and the signed area.
pub fn barycentric_gradients(v: [Point; 3]) -> ([[f64; 2]; 3], f64) {
    let two_a = (v[1][0] - v[0][0]) * (v[2][1] - v[0][1]) - (v[2][0] - v[0][0]) * (v[1][1] - v[0][1]);
    let g = [
        [(v[1][1] - v[2][1]) / two_a, (v[2][0] - v[1][0]) / two_a],
        [(v[2][1] - v[0][1]) / two_a, (v[0][0] - v[2][0]) / two_a],
        [(v[0][1] - v[1][1]) / two_a, (v[1][0] - v[0][0]) / two_a],
    ];
    (g, 0.5 * two_a)
}

/// Quadratic shape functions at barycentric point `l`.
pub fn t6_shape(l: [f64; 3]) -> [f64; 6] {
    [
        l[0] * (2.0 * l[0] - 1.0),
        l[1] * (2.0 * l[1] - 1.0),
        l[2] * (2.0 * l[2] - 1.0),
        4.0 * l[0] * l[1],
        4.0 * l[1] * l[2],
        4.0 * l[2] * l[0],
    ]
}

pub fn t6_ip_geometry(v: [Point; 3], rule: &QuadratureRule) -> Vec<IpGeometry> {
    let (g, area) = barycentric_gradients(v);
    rule.points
        .iter()
        .zip(&rule.weights)
        .map(|(l, w)| {
            let mut dn = [[0.0; 2]; 6];
            for i in 0..3 {
                for d in 0..2 {
                    dn[i][d] = (4.0 * l[i] - 1.0) * g[i][d];
                }
            }
            for (k, (a, b)) in [(0, 1), (1, 2), (2, 0)].into_iter().enumerate() {
                for d in 0..2 {
                    dn[3 + k][d] = 4.0 * (l[b] * g[a][d] + l[a] * g[b][d]);
                }
            }
            let position = [
                l[0] * v[0][0] + l[1] * v[1][0] + l[2] * v[2][0],
                l[0] * v[0][1] + l[1] * v[1][1] + l[2] * v[2][1],
            ];
            IpGeometry {
                dn,
                weight: w * 2.0 * area,
                bary: *l,
                position,
            }
        })
        .collect()
}

/// Discretized mechanical problem: two displacement dofs per T6 node, three
/// integration points per element. Integration point `e*3 + q` is point `q`
/// of element `e`.
#[derive(Debug, Clone)]
pub struct MechanicalModel {
    mesh: Mesh,
    ips: Vec<IpGeometry>,
    pattern: CsrMatrix,
    positions: Vec<usize>,
    dof_order: Vec<usize>,
}

impl MechanicalModel {
    pub fn new(mesh: &Mesh) -> Result<Self> {
        if !mesh.is_quadratic() {
            return Err(Error::InvalidMesh(
                "mechanical model needs a T6 (promoted) mesh".into(),
            ));
        }
        let rule = QuadratureRule::degree2();
        let mut ips = Vec::with_capacity(mesh.n_elements() * IPS_PER_ELEMENT);
        for t in mesh.t6_elements() {
            let v = [mesh.nodes()[t[0]], mesh.nodes()[t[1]], mesh.nodes()[t[2]]];
            ips.extend(t6_ip_geometry(v, &rule));
        }
        let n_dofs = 2 * mesh.n_nodes();
        let edofs: Vec<[usize; EDOF]> = mesh.t6_elements().iter().map(element_dofs).collect();
        let pattern = CsrMatrix::from_groups(n_dofs, edofs.iter().map(|d| &d[..]));
        let mut positions = Vec::with_capacity(edofs.len() * EDOF * EDOF);
        for d in &edofs {
            for &i in d {
                for &j in d {
                    positions.push(pattern.position(i, j).expect("pattern covers element"));
                }
            }
        }
        // node-level ordering expanded to dofs keeps the ordering cheap
        let node_groups: Vec<Vec<usize>> = mesh.t6_elements().iter().map(|t| t.to_vec()).collect();
        let node_graph = CsrMatrix::from_groups(mesh.n_nodes(), node_groups.iter().map(|g| g.as_slice()));
        let node_order = reverse_cuthill_mckee(&node_graph.adjacency());
        let dof_order = node_order.iter().flat_map(|&n| [2 * n, 2 * n + 1]).collect();
        Ok(MechanicalModel {
            mesh: mesh.clone(),
            ips,
            pattern,
            positions,
            dof_order,
        })
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn n_dofs(&self) -> usize {
        2 * self.mesh.n_nodes()
    }

    pub fn n_ips(&self) -> usize {
        self.ips.len()
    }

    pub fn ip(&self, index: usize) -> &IpGeometry {
        &self.ips[index]
    }

    pub fn ips(&self) -> &[IpGeometry] {
        &self.ips
    }

    /// Fill-reducing dof ordering used by the linear solver.
    pub fn dof_order(&self) -> &[usize] {
        &self.dof_order
    }

    pub fn empty_matrix(&self) -> CsrMatrix {
        let mut m = self.pattern.clone();
        m.clear();
        m
    }

    pub fn strain_at_ip(&self, element: usize, q: usize, u: &[f64]) -> Voigt {
        let t = &self.mesh.t6_elements()[element];
        let ip = &self.ips[element * IPS_PER_ELEMENT + q];
        let mut eps = Voigt::zeros();
        for (a, &node) in t.iter().enumerate() {
            let (ux, uy) = (u[2 * node], u[2 * node + 1]);
            let [dx, dy] = ip.dn[a];
            eps[0] += dx * ux;
            eps[1] += dy * uy;
            eps[2] += dy * ux + dx * uy;
        }
        eps
    }

    pub fn strains(&self, u: &[f64]) -> Vec<Voigt> {
        (0..self.mesh.n_elements())
            .flat_map(|e| (0..IPS_PER_ELEMENT).map(move |q| (e, q)))
            .map(|(e, q)| self.strain_at_ip(e, q, u))
            .collect()
    }

    /// Internal-force vector and (optionally) the tangent stiffness at `u`.
    /// Elements and their integration points are visited in index order, so
    /// the result is bitwise reproducible.
    pub fn assemble(
        &self,
        u: &[f64],
        constitutive: &mut dyn FnMut(usize, &Voigt) -> Result<ConstitutiveResponse>,
        mut tangent: Option<&mut CsrMatrix>,
    ) -> Result<Vec<f64>> {
        let mut residual = vec![0.0; self.n_dofs()];
        if let Some(k) = tangent.as_deref_mut() {
            k.clear();
        }
        for (e, t) in self.mesh.t6_elements().iter().enumerate() {
            let dofs = element_dofs(t);
            let mut fe = [0.0; EDOF];
            let mut ke = [[0.0; EDOF]; EDOF];
            for q in 0..IPS_PER_ELEMENT {
                let index = e * IPS_PER_ELEMENT + q;
                let ip = &self.ips[index];
                let eps = self.strain_at_ip(e, q, u);
                let resp = constitutive(index, &eps).map_err(|source| Error::Constitutive {
                    element: e,
                    ip: q,
                    source: Box::new(source),
                })?;
                let w = ip.weight;
                let s = resp.stress;
                for a in 0..6 {
                    let [dx, dy] = ip.dn[a];
                    fe[2 * a] += (dx * s[0] + dy * s[2]) * w;
                    fe[2 * a + 1] += (dy * s[1] + dx * s[2]) * w;
                }
                if tangent.is_some() {
                    let b = b_matrix(&ip.dn);
                    let d = &resp.tangent;
                    let mut db = [[0.0; EDOF]; 3];
                    for r in 0..3 {
                        for c in 0..EDOF {
                            db[r][c] = d[(r, 0)] * b[0][c] + d[(r, 1)] * b[1][c] + d[(r, 2)] * b[2][c];
                        }
                    }
                    for i in 0..EDOF {
                        let (b0, b1, b2) = (b[0][i], b[1][i], b[2][i]);
                        if b0 == 0.0 && b1 == 0.0 && b2 == 0.0 {
                            continue;
                        }
                        for j in 0..EDOF {
                            ke[i][j] += (b0 * db[0][j] + b1 * db[1][j] + b2 * db[2][j]) * w;
                        }
                    }
                }
            }
            for (i, &g) in dofs.iter().enumerate() {
                residual[g] += fe[i];
            }
            if let Some(k) = tangent.as_deref_mut() {
                let pos = &self.positions[e * EDOF * EDOF..(e + 1) * EDOF * EDOF];
                let vals = k.values_mut();
                for i in 0..EDOF {
                    for j in 0..EDOF {
                        vals[pos[i * EDOF + j]] += ke[i][j];
                    }
                }
            }
        }
        Ok(residual)
    }

    /// Dofs of every node in a named boundary set, for one displacement
    /// component (0 = x, 1 = y).
    pub fn set_dofs(&self, set: &str, component: usize) -> Result<Vec<usize>> {
        let ids = self
            .mesh
            .boundary_set(set)
            .ok_or_else(|| Error::InvalidInput(format!("unknown boundary set `{set}`")))?;
        Ok(ids.iter().map(|&n| 2 * n + component).collect())
    }
}

fn element_dofs(t: &[usize; 6]) -> [usize; EDOF] {
    let mut d = [0; EDOF];
    for (a, &n) in t.iter().enumerate() {
        d[2 * a] = 2 * n;
        d[2 * a + 1] = 2 * n + 1;
    }
    d
}

fn b_matrix(dn: &[[f64; 2]; 6]) -> [[f64; EDOF]; 3] {
    let mut b = [[0.0; EDOF]; 3];
    for a in 0..6 {
        let [dx, dy] = dn[a];
        b[0][2 * a] = dx;
        b[1][2 * a + 1] = dy;
        b[2][2 * a] = dy;
        b[2][2 * a + 1] = dx;
    }
    b
}

/// Isotropic linear elastic response with a fixed matrix, handy for tests
/// and for the elastic predictor.
pub fn linear_elastic(d: Tangent) -> impl FnMut(usize, &Voigt) -> Result<ConstitutiveResponse> {
    move |_, eps| {
        Ok(ConstitutiveResponse {
            stress: d * eps,
            tangent: d,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::generate_rectangle;

    fn model(nx: usize, ny: usize) -> MechanicalModel {
        let m = generate_rectangle(nx, ny, 2.0, 1.0).unwrap().promote_to_t6().unwrap();
        MechanicalModel::new(&m).unwrap()
    }

    #[test]
    fn shape_functions_partition_unity_and_gradients_sum_zero() {
        let v = [[0.1, 0.2], [1.3, 0.1], [0.4, 0.9]];
        let geo = t6_ip_geometry(v, &QuadratureRule::degree2());
        for ip in &geo {
            let n = t6_shape(ip.bary);
            assert!((n.iter().sum::<f64>() - 1.0).abs() < 1e-14);
            let sx: f64 = ip.dn.iter().map(|d| d[0]).sum();
            let sy: f64 = ip.dn.iter().map(|d| d[1]).sum();
            assert!(sx.abs() < 1e-12 && sy.abs() < 1e-12);
        }
        let area: f64 = geo.iter().map(|g| g.weight).sum();
        assert!((area - barycentric_gradients(v).1).abs() < 1e-14);
    }

    #[test]
    fn zero_displacement_gives_zero_strain() {
        let m = model(2, 2);
        let u = vec![0.0; m.n_dofs()];
        assert!(m.strains(&u).iter().all(|e| e.norm() == 0.0));
    }

    #[test]
    fn linear_field_gives_exact_uniform_strain() {
        let m = model(3, 2);
        let a = 0.0123;
        let mut u = vec![0.0; m.n_dofs()];
        for (i, p) in m.mesh().nodes().iter().enumerate() {
            u[2 * i] = a * p[0];
        }
        for e in m.strains(&u) {
            assert!((e[0] - a).abs() < 1e-15);
            assert!(e[1].abs() < 1e-15 && e[2].abs() < 1e-15);
        }
    }

    #[test]
    fn small_rotation_is_strain_free_to_first_order() {
        let m = model(3, 2);
        for angle in [1e-3, 1e-4] {
            let (c, s) = (f64::cos(angle), f64::sin(angle));
            let mut u = vec![0.0; m.n_dofs()];
            for (i, p) in m.mesh().nodes().iter().enumerate() {
                u[2 * i] = c * p[0] - s * p[1] - p[0];
                u[2 * i + 1] = s * p[0] + c * p[1] - p[1];
            }
            // the exact linearized strain of a finite rotation is (c-1, c-1, 0)
            for e in m.strains(&u) {
                assert!(e.norm() <= angle * angle);
                assert!(e[2].abs() <= 1e-10 * angle * angle + 1e-15);
            }
        }
    }

    #[test]
    fn zero_displacement_gives_zero_residual() {
        let m = model(2, 2);
        let d = crate::material::ElasticParams::new(3130.0, 0.37).unwrap().plane_stress_matrix();
        let u = vec![0.0; m.n_dofs()];
        let r = m.assemble(&u, &mut linear_elastic(d), None).unwrap();
        assert!(r.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn elastic_tangent_is_symmetric() {
        let m = model(3, 3);
        let d = crate::material::ElasticParams::new(3130.0, 0.37).unwrap().plane_stress_matrix();
        let u = vec![0.0; m.n_dofs()];
        let mut k = m.empty_matrix();
        m.assemble(&u, &mut linear_elastic(d), Some(&mut k)).unwrap();
        assert!(k.asymmetry() < 1e-14);
    }

    #[test]
    fn constitutive_errors_carry_location() {
        let m = model(1, 1);
        let u = vec![0.0; m.n_dofs()];
        let mut failing = |ip: usize, _: &Voigt| -> Result<ConstitutiveResponse> {
            if ip == 4 {
                Err(Error::InvalidInput("boom".into()))
            } else {
                Ok(ConstitutiveResponse {
                    stress: Voigt::zeros(),
                    tangent: Tangent::identity(),
                })
            }
        };
        match m.assemble(&u, &mut failing, None) {
            Err(Error::Constitutive { element, ip, .. }) => assert_eq!((element, ip), (1, 1)),
            other => panic!("{other:?}"),
        }
    }
}
