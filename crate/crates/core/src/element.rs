//! P1 element matrices for the A–V block forms and the surface impedance
//! condition.
//!
//! Local dof numbering: the vector potential dof for node `a` and Cartesian
//! component `c` is `3a + c`; the scalar potential dof for node `a` is `a`.
//! Rows index test functions, columns trial functions. Gradients of the
//! barycentric coordinates are constant on each element, so every integral is
//! evaluated in closed form.

use crate::mesh::Point;
use crate::C64;

const ZERO: C64 = C64::new(0.0, 0.0);

/// Dense complex element matrix with `R` test and `C` trial dofs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElementMatrix<const R: usize, const C: usize> {
    pub data: [[C64; C]; R],
}

impl<const R: usize, const C: usize> ElementMatrix<R, C> {
    pub fn zeros() -> Self {
        ElementMatrix {
            data: [[ZERO; C]; R],
        }
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.data[i][j]
    }

    pub fn transpose(&self) -> ElementMatrix<C, R> {
        let mut t = ElementMatrix::<C, R>::zeros();
        for i in 0..R {
            for j in 0..C {
                t.data[j][i] = self.data[i][j];
            }
        }
        t
    }

    pub fn apply(&self, x: &[C64; C]) -> [C64; R] {
        let mut y = [ZERO; R];
        for i in 0..R {
            for j in 0..C {
                y[i] += self.data[i][j] * x[j];
            }
        }
        y
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data
            .iter()
            .flatten()
            .map(|v| v.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    pub fn frobenius_diff(&self, other: &Self) -> f64 {
        let mut s = 0.0;
        for i in 0..R {
            for j in 0..C {
                s += (self.data[i][j] - other.data[i][j]).norm_sqr();
            }
        }
        s.sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.data
            .iter()
            .flatten()
            .all(|v| v.re.is_finite() && v.im.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ElementError {
    Degenerate,
}

impl std::fmt::Display for ElementError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("degenerate element")
    }
}

impl std::error::Error for ElementError {}

/// Volume and barycentric gradients of a tetrahedron.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TetGeometry {
    pub volume: f64,
    pub grads: [[f64; 3]; 4],
}

impl TetGeometry {
    /// Requires positive orientation.
    pub fn new(p: [Point; 4]) -> Result<Self, ElementError> {
        let e = [
            sub(p[1], p[0]),
            sub(p[2], p[0]),
            sub(p[3], p[0]),
        ];
        let det = dot(e[0], cross(e[1], e[2]));
        let scale = norm(e[0]) * norm(e[1]) * norm(e[2]);
        if !(det > 1e-14 * scale) || !det.is_finite() {
            return Err(ElementError::Degenerate);
        }
        // Rows of the inverse Jacobian are the gradients of λ1..λ3.
        let inv = 1.0 / det;
        let g1 = scale3(cross(e[1], e[2]), inv);
        let g2 = scale3(cross(e[2], e[0]), inv);
        let g3 = scale3(cross(e[0], e[1]), inv);
        let g0 = [
            -(g1[0] + g2[0] + g3[0]),
            -(g1[1] + g2[1] + g3[1]),
            -(g1[2] + g2[2] + g3[2]),
        ];
        Ok(TetGeometry {
            volume: det / 6.0,
            grads: [g0, g1, g2, g3],
        })
    }

    /// `∫_K λ_a λ_b`.
    #[inline]
    pub fn mass(&self, a: usize, b: usize) -> f64 {
        self.volume * if a == b { 0.1 } else { 0.05 }
    }
}

/// Area, unit normal and tangential barycentric gradients of a triangle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TriGeometry {
    pub area: f64,
    pub normal: [f64; 3],
    pub grads: [[f64; 3]; 3],
}

impl TriGeometry {
    pub fn new(p: [Point; 3]) -> Result<Self, ElementError> {
        let n2 = cross(sub(p[1], p[0]), sub(p[2], p[0]));
        let twice = norm(n2);
        let scale = norm(sub(p[1], p[0])) * norm(sub(p[2], p[0]));
        if !(twice > 1e-14 * scale) || !twice.is_finite() {
            return Err(ElementError::Degenerate);
        }
        let n = scale3(n2, 1.0 / twice);
        let mut grads = [[0.0; 3]; 3];
        for (a, g) in grads.iter_mut().enumerate() {
            let edge = sub(p[(a + 2) % 3], p[(a + 1) % 3]);
            *g = scale3(cross(n, edge), 1.0 / twice);
        }
        Ok(TriGeometry {
            area: 0.5 * twice,
            normal: n,
            grads,
        })
    }

    /// Tangential projector `I − n nᵀ`.
    pub fn projector(&self) -> [[f64; 3]; 3] {
        let n = self.normal;
        let mut p = [[0.0; 3]; 3];
        for c in 0..3 {
            for d in 0..3 {
                p[c][d] = if c == d { 1.0 } else { 0.0 } - n[c] * n[d];
            }
        }
        p
    }
}

/// A–A block: curl-curl with `1/μ`, grad-div gauge penalty with `1/μ̃`, and
/// the conductivity mass term `−iωσ ∫ λ_a λ_b`.
pub fn element_l11(g: &TetGeometry, mu: f64, mu_tilde: f64, sigma: f64, omega: f64) -> ElementMatrix<12, 12> {
    let mut m = ElementMatrix::<12, 12>::zeros();
    let (inv_mu, inv_mt, v) = (1.0 / mu, 1.0 / mu_tilde, g.volume);
    for a in 0..4 {
        for b in 0..4 {
            let ga = g.grads[a];
            let gb = g.grads[b];
            let gg = dot(ga, gb);
            let mass = -omega * sigma * g.mass(a, b);
            for c in 0..3 {
                for d in 0..3 {
                    let mut re = inv_mu * (-ga[d] * gb[c]) + inv_mt * ga[c] * gb[d];
                    let mut im = 0.0;
                    if c == d {
                        re += inv_mu * gg;
                        im = mass;
                    }
                    m.data[3 * a + c][3 * b + d] = C64::new(v * re, im);
                }
            }
        }
    }
    m
}

/// A–V coupling: `−σ ∫ ∇λ_b · (λ_a e_c)`.
pub fn element_l12(g: &TetGeometry, sigma: f64) -> ElementMatrix<12, 4> {
    let mut m = ElementMatrix::<12, 4>::zeros();
    let w = -sigma * g.volume / 4.0;
    for a in 0..4 {
        for c in 0..3 {
            for b in 0..4 {
                m.data[3 * a + c][b] = C64::new(w * g.grads[b][c], 0.0);
            }
        }
    }
    m
}

/// V–A coupling: `−σ ∫ (λ_b e_d) · ∇λ_a`.
pub fn element_l21(g: &TetGeometry, sigma: f64) -> ElementMatrix<4, 12> {
    let mut m = ElementMatrix::<4, 12>::zeros();
    let w = -sigma * g.volume / 4.0;
    for a in 0..4 {
        for b in 0..4 {
            for d in 0..3 {
                m.data[a][3 * b + d] = C64::new(w * g.grads[a][d], 0.0);
            }
        }
    }
    m
}

/// V–V block: `−(1/iω) σ_s ∫ ∇λ_b·∇λ_a + δ μ σ ∫ λ_a λ_b`.
///
/// `sigma_stiff` is the conductivity in the stiffness term and `sigma` the
/// one in the gauge mass term; they differ only when the stiffness is
/// evaluated with the pseudo-conductivity.
pub fn element_l22(
    g: &TetGeometry,
    sigma_stiff: f64,
    sigma: f64,
    omega: f64,
    delta_gauge: f64,
    mu: f64,
) -> ElementMatrix<4, 4> {
    let mut m = ElementMatrix::<4, 4>::zeros();
    // −1/(iω) = i/ω
    let k = sigma_stiff * g.volume / omega;
    let gauge = delta_gauge * mu * sigma;
    for a in 0..4 {
        for b in 0..4 {
            m.data[a][b] = C64::new(gauge * g.mass(a, b), k * dot(g.grads[a], g.grads[b]));
        }
    }
    m
}

/// Surface impedance contributions of one boundary triangle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IbcMatrices {
    pub aa: ElementMatrix<9, 9>,
    pub av: ElementMatrix<9, 3>,
    pub va: ElementMatrix<3, 9>,
    pub vv: ElementMatrix<3, 3>,
}

/// `−(1/Z) ∫_T (iω A_τ + ∇_τ V) · Φ_τ` and `−(1/Z) ∫_T (iω A_τ + ∇_τ V) · ∇_τ φ`.
pub fn element_ibc(t: &TriGeometry, z: C64, omega: f64) -> IbcMatrices {
    let inv_z = 1.0 / z;
    let iw_z = C64::new(0.0, omega) * inv_z;
    let p = t.projector();
    let area = t.area;
    let mut aa = ElementMatrix::<9, 9>::zeros();
    let mut av = ElementMatrix::<9, 3>::zeros();
    let mut va = ElementMatrix::<3, 9>::zeros();
    let mut vv = ElementMatrix::<3, 3>::zeros();
    for a in 0..3 {
        for b in 0..3 {
            let mass = area * if a == b { 2.0 } else { 1.0 } / 12.0;
            for c in 0..3 {
                for d in 0..3 {
                    aa.data[3 * a + c][3 * b + d] = -iw_z * (mass * p[c][d]);
                }
                av.data[3 * a + c][b] = -inv_z * (t.grads[b][c] * area / 3.0);
                va.data[a][3 * b + c] = -iw_z * (t.grads[a][c] * area / 3.0);
            }
            vv.data[a][b] = -inv_z * (area * dot(t.grads[a], t.grads[b]));
        }
    }
    IbcMatrices { aa, av, va, vv }
}

fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn cross(a: Point, b: Point) -> Point {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn dot(a: Point, b: Point) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn norm(a: Point) -> f64 {
    dot(a, a).sqrt()
}

fn scale3(a: Point, s: f64) -> Point {
    [a[0] * s, a[1] * s, a[2] * s]
}

#[cfg(test)]
mod tests {
    use super::*;

    const UNIT: [Point; 4] = [
        [0.0, 0.0, 0.0],
        [1.0, 0.0, 0.0],
        [0.0, 1.0, 0.0],
        [0.0, 0.0, 1.0],
    ];

    fn close(a: C64, b: C64) -> bool {
        (a - b).norm() < 1e-14
    }

    #[test]
    fn unit_tet_gradients() {
        let g = TetGeometry::new(UNIT).unwrap();
        assert!((g.volume - 1.0 / 6.0).abs() < 1e-16);
        assert_eq!(g.grads[0], [-1.0, -1.0, -1.0]);
        assert_eq!(g.grads[2], [0.0, 1.0, 0.0]);
    }

    #[test]
    fn l11_unit_entry() {
        let g = TetGeometry::new(UNIT).unwrap();
        let m = element_l11(&g, 1.0, 1.0, 0.0, 1.0);
        assert!(close(m.get(0, 0), C64::new(0.5, 0.0)));
    }

    #[test]
    fn l11_kills_constant_fields() {
        let g = TetGeometry::new(UNIT).unwrap();
        let m = element_l11(&g, 2.0, 3.0, 0.0, 1.0);
        let mut x = [ZERO; 12];
        for a in 0..4 {
            x[3 * a] = C64::new(0.3, 0.1);
            x[3 * a + 1] = C64::new(-1.0, 0.0);
            x[3 * a + 2] = C64::new(0.0, 2.0);
        }
        assert!(m.apply(&x).iter().all(|v| v.norm() < 1e-14));
    }

    #[test]
    fn couplings_unit_entries() {
        let g = TetGeometry::new(UNIT).unwrap();
        let m12 = element_l12(&g, 1.0);
        let m21 = element_l21(&g, 1.0);
        assert!(close(m12.get(0, 0), C64::new(1.0 / 24.0, 0.0)));
        assert!(close(m21.get(0, 0), C64::new(1.0 / 24.0, 0.0)));
        assert_eq!(m21, m12.transpose());
    }

    #[test]
    fn l22_unit_entry_and_constant_kernel() {
        let g = TetGeometry::new(UNIT).unwrap();
        let m = element_l22(&g, 1.0, 1.0, 1.0, 0.0, 1.0);
        assert!(close(m.get(0, 0), C64::new(0.0, 0.5)));
        let one = [C64::new(1.0, 0.0); 4];
        assert!(m.apply(&one).iter().all(|v| v.norm() < 1e-15));
    }

    #[test]
    fn ibc_unit_triangle() {
        let t = TriGeometry::new([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]).unwrap();
        assert_eq!(t.grads[0], [-1.0, -1.0, 0.0]);
        let m = element_ibc(&t, C64::new(1.0, 0.0), 1.0);
        assert!(close(m.aa.get(0, 0), C64::new(0.0, -1.0 / 12.0)));
        // normal component is not seen
        assert!(m.aa.get(2, 2).norm() < 1e-16);
        let one = [C64::new(1.0, 0.0); 3];
        assert!(m.vv.apply(&one).iter().all(|v| v.norm() < 1e-15));
    }

    #[test]
    fn degenerate_rejected() {
        let flat = [UNIT[0], UNIT[1], UNIT[2], [1.0, 1.0, 0.0]];
        assert_eq!(TetGeometry::new(flat), Err(ElementError::Degenerate));
    }
}
