//! Electric field, skin depth, surface impedance and coil impedance signals.

use thiserror::Error;

use crate::element::TetGeometry;
use crate::mesh::{ConductorIndexMap, Mesh, Region};
use crate::C64;

const ZERO: C64 = C64::new(0.0, 0.0);
const I: C64 = C64::new(0.0, 1.0);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SignalError {
    #[error("{name} must be positive (got {value})")]
    NonPositive { name: &'static str, value: f64 },
    #[error("solution has {got} {what}, mesh needs {expected}")]
    Mismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("tetrahedron {0} is degenerate")]
    Degenerate(usize),
}

fn positive(name: &'static str, value: f64) -> Result<(), SignalError> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(SignalError::NonPositive { name, value })
    }
}

/// `δ = √(2 / (ωμσ))`.
pub fn skin_depth(omega: f64, mu: f64, sigma: f64) -> Result<f64, SignalError> {
    positive("omega", omega)?;
    positive("mu", mu)?;
    positive("sigma", sigma)?;
    Ok((2.0 / (omega * mu * sigma)).sqrt())
}

/// `Z = (1 − i) / (δσ)`.
pub fn surface_impedance(omega: f64, mu: f64, sigma: f64) -> Result<C64, SignalError> {
    let delta = skin_depth(omega, mu, sigma)?;
    Ok(C64::new(1.0, -1.0) / (delta * sigma))
}

/// Nodal vector potential and conductor scalar potential.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialSolution {
    pub a: Vec<[C64; 3]>,
    /// Indexed by conductor-local dof.
    pub v: Vec<C64>,
    pub omega: f64,
}

impl PotentialSolution {
    /// Split a global solution vector (A-dofs then V-dofs).
    pub fn from_vector(x: &[C64], n_nodes: usize, n_conductor: usize, omega: f64) -> Result<Self, SignalError> {
        if x.len() != 3 * n_nodes + n_conductor {
            return Err(SignalError::Mismatch {
                what: "dofs",
                expected: 3 * n_nodes + n_conductor,
                got: x.len(),
            });
        }
        let a = (0..n_nodes)
            .map(|n| [x[3 * n], x[3 * n + 1], x[3 * n + 2]])
            .collect();
        Ok(PotentialSolution {
            a,
            v: x[3 * n_nodes..].to_vec(),
            omega,
        })
    }

    pub fn to_vector(&self) -> Vec<C64> {
        let mut x: Vec<C64> = self.a.iter().flatten().copied().collect();
        x.extend_from_slice(&self.v);
        x
    }

    fn check(&self, mesh: &Mesh, cmap: &ConductorIndexMap) -> Result<(), SignalError> {
        if self.a.len() != mesh.nodes.len() {
            return Err(SignalError::Mismatch {
                what: "nodes",
                expected: mesh.nodes.len(),
                got: self.a.len(),
            });
        }
        if self.v.len() != cmap.len() {
            return Err(SignalError::Mismatch {
                what: "conductor dofs",
                expected: cmap.len(),
                got: self.v.len(),
            });
        }
        Ok(())
    }

    /// `∇V` on a tetrahedron, or zero when any vertex has no scalar dof.
    fn grad_v(&self, g: &TetGeometry, nodes: [usize; 4], cmap: &ConductorIndexMap) -> [C64; 3] {
        let mut out = [ZERO; 3];
        for (a, &n) in nodes.iter().enumerate() {
            let Some(k) = cmap.local(n) else {
                return [ZERO; 3];
            };
            for c in 0..3 {
                out[c] += self.v[k] * g.grads[a][c];
            }
        }
        out
    }

    fn curl_a(&self, g: &TetGeometry, nodes: [usize; 4]) -> [C64; 3] {
        let mut out = [ZERO; 3];
        for (a, &n) in nodes.iter().enumerate() {
            let ga = g.grads[a];
            let v = self.a[n];
            out[0] += v[2] * ga[1] - v[1] * ga[2];
            out[1] += v[0] * ga[2] - v[2] * ga[0];
            out[2] += v[1] * ga[0] - v[0] * ga[1];
        }
        out
    }
}

/// `E = iωA + ∇V` per tetrahedron, evaluated at the centroid; the gradient
/// term is present only on tetrahedra for which `is_conductor` holds.
pub fn electric_field(
    sol: &PotentialSolution,
    mesh: &Mesh,
    cmap: &ConductorIndexMap,
    is_conductor: impl Fn(Region) -> bool,
) -> Result<Vec<[C64; 3]>, SignalError> {
    sol.check(mesh, cmap)?;
    let iw = I * sol.omega;
    let mut out = Vec::with_capacity(mesh.tets.len());
    for (t, tet) in mesh.tets.iter().enumerate() {
        let mut e = [ZERO; 3];
        for &n in &tet.nodes {
            for c in 0..3 {
                e[c] += sol.a[n][c] * 0.25;
            }
        }
        for v in &mut e {
            *v *= iw;
        }
        if is_conductor(tet.region) {
            let g = TetGeometry::new(mesh.tet_points(t)).map_err(|_| SignalError::Degenerate(t))?;
            let gv = sol.grad_v(&g, tet.nodes, cmap);
            for c in 0..3 {
                e[c] += gv[c];
            }
        }
        out.push(e);
    }
    Ok(out)
}

/// Material data entering the impedance variation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DefectContrast {
    /// Permeability of the defect in the actual configuration.
    pub mu_d: f64,
    /// Permeability of the defect in the reference configuration.
    pub mu_eps: f64,
    /// Conductivity of the defect in the actual configuration.
    pub sigma_d: f64,
    /// Conductivity of the defect in the reference configuration.
    pub sigma_eps: f64,
    /// Pair with the complex conjugate of the reference field.
    pub conjugate: bool,
}

/// Impedance variation between the actual field of coil `k` and the
/// reference field of coil `l`, summed over the defect tetrahedra:
///
/// `(1/iω)(μ_ε − μ_d)/(μ_d μ_ε) Σ ∫ curl A_k · curl A_l + Σ (σ − σ_ε) ∫ E_k · E_l`.
///
/// The `E` integral is exact for the P1 fields (mass-matrix pairing).
pub fn delta_impedance(
    sol_k: &PotentialSolution,
    ref_l: &PotentialSolution,
    mesh: &Mesh,
    cmap: &ConductorIndexMap,
    contrast: &DefectContrast,
) -> Result<C64, SignalError> {
    sol_k.check(mesh, cmap)?;
    ref_l.check(mesh, cmap)?;
    let defect: Vec<usize> = (0..mesh.tets.len())
        .filter(|&t| mesh.tets[t].region == Region::Defect)
        .collect();
    if defect.is_empty() {
        log::warn!("no defect tetrahedra: impedance variation is zero");
        return Ok(ZERO);
    }
    let c = contrast;
    let mag = (c.mu_eps - c.mu_d) / (c.mu_d * c.mu_eps);
    let ele = c.sigma_d - c.sigma_eps;
    if mag == 0.0 && ele == 0.0 {
        return Ok(ZERO);
    }
    let omega = sol_k.omega;
    let iw = I * omega;
    let pair = |x: C64, y: C64| if c.conjugate { x * y.conj() } else { x * y };
    let mut curl_sum = ZERO;
    let mut e_sum = ZERO;
    for &t in &defect {
        let tet = &mesh.tets[t];
        let g = TetGeometry::new(mesh.tet_points(t)).map_err(|_| SignalError::Degenerate(t))?;
        let vol = g.volume;
        if mag != 0.0 {
            let ck = sol_k.curl_a(&g, tet.nodes);
            let cl = ref_l.curl_a(&g, tet.nodes);
            curl_sum += (0..3).map(|i| pair(ck[i], cl[i])).sum::<C64>() * vol;
        }
        if ele != 0.0 {
            let gk = sol_k.grad_v(&g, tet.nodes, cmap);
            let gl = ref_l.grad_v(&g, tet.nodes, cmap);
            let mut s = ZERO;
            let mut mean_k = [ZERO; 3];
            let mut mean_l = [ZERO; 3];
            for a in 0..4 {
                let ak = sol_k.a[tet.nodes[a]];
                let al = ref_l.a[tet.nodes[a]];
                for d in 0..3 {
                    mean_k[d] += ak[d] * 0.25;
                    mean_l[d] += al[d] * 0.25;
                }
                for b in 0..4 {
                    let bl = ref_l.a[tet.nodes[b]];
                    let m = g.mass(a, b);
                    for d in 0..3 {
                        s += pair(iw * ak[d], iw * bl[d]) * m;
                    }
                }
            }
            for d in 0..3 {
                s += pair(iw * mean_k[d], gl[d]) * vol;
                s += pair(gk[d], iw * mean_l[d]) * vol;
                s += pair(gk[d], gl[d]) * vol;
            }
            e_sum += s;
        }
    }
    Ok(curl_sum * (mag / iw) + e_sum * ele)
}

/// 2×2 impedance variation matrix, `dz[k][l]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeltaZ(pub [[C64; 2]; 2]);

/// `Z_FA = (i/2)(ΔZ₁₁ + ΔZ₁₂)`, `Z_F3 = (i/2)(ΔZ₁₁ − ΔZ₂₂)`.
pub fn signal_modes(dz: &DeltaZ) -> (C64, C64) {
    let h = C64::new(0.0, 0.5);
    let z = dz.0;
    (h * (z[0][0] + z[0][1]), h * (z[0][0] - z[1][1]))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignalPoint {
    pub z: f64,
    pub delta: DeltaZ,
    pub z_fa: C64,
    pub z_f3: C64,
}

impl SignalPoint {
    pub fn new(z: f64, delta: DeltaZ) -> Self {
        let (z_fa, z_f3) = signal_modes(&delta);
        SignalPoint {
            z,
            delta,
            z_fa,
            z_f3,
        }
    }

    pub fn failed(z: f64) -> Self {
        let nan = C64::new(f64::NAN, f64::NAN);
        SignalPoint {
            z,
            delta: DeltaZ([[nan; 2]; 2]),
            z_fa: nan,
            z_f3: nan,
        }
    }

    pub fn is_failed(&self) -> bool {
        self.z_fa.re.is_nan()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{unit_cube_mesh, Region};
    use crate::MU_0;

    #[test]
    fn skin_depth_cases() {
        assert_eq!(skin_depth(2.0, 1.0, 1.0).unwrap(), 1.0);
        let w = 2.0 * std::f64::consts::PI * 1e5;
        let d = skin_depth(w, MU_0, 1e6).unwrap();
        assert!((d - 1.5915e-3).abs() < 1e-7);
        let d4 = skin_depth(w, MU_0, 4e6).unwrap();
        assert!((d4 - d / 2.0).abs() < 1e-18);
        assert!(skin_depth(0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn surface_impedance_unit() {
        // δσ = 1 for ω = 2, μ = 1, σ = 1
        assert_eq!(surface_impedance(2.0, 1.0, 1.0).unwrap(), C64::new(1.0, -1.0));
    }

    #[test]
    fn modes() {
        let z = DeltaZ([[C64::new(2.0, 0.0), C64::new(4.0, 0.0)], [ZERO, C64::new(2.0, 0.0)]]);
        let (fa, f3) = signal_modes(&z);
        assert_eq!(fa, C64::new(0.0, 3.0));
        assert_eq!(f3, ZERO);
    }

    #[test]
    fn field_of_linear_potential() {
        let m = unit_cube_mesh(1, Region::Tube);
        let cmap = m.conductor_map().unwrap();
        let sol = PotentialSolution {
            a: vec![[ZERO; 3]; m.nodes.len()],
            v: cmap.nodes().iter().map(|&n| C64::new(m.nodes[n][0], 0.0)).collect(),
            omega: 3.0,
        };
        let e = electric_field(&sol, &m, &cmap, Region::is_conductor).unwrap();
        for et in e {
            assert!((et[0] - C64::new(1.0, 0.0)).norm() < 1e-14);
            assert!(et[1].norm() < 1e-14 && et[2].norm() < 1e-14);
        }
    }

    #[test]
    fn matched_contrast_is_exactly_zero() {
        let m = unit_cube_mesh(1, Region::Defect);
        let cmap = m.conductor_map().unwrap();
        let sol = PotentialSolution {
            a: vec![[C64::new(1.0, 2.0); 3]; m.nodes.len()],
            v: vec![C64::new(0.5, 0.0); cmap.len()],
            omega: 1.0,
        };
        let c = DefectContrast {
            mu_d: 2.0,
            mu_eps: 2.0,
            sigma_d: 1.0,
            sigma_eps: 1.0,
            conjugate: false,
        };
        assert_eq!(delta_impedance(&sol, &sol, &m, &cmap, &c).unwrap(), ZERO);
    }
}
