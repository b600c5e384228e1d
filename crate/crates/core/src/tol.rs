/// Numerical tolerances shared across modules.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct Tolerances {
    /// Allowed deviation of an isometry determinant from one.
    pub det: f64,
    /// Relative target for adaptive quadrature.
    pub quad_rel: f64,
    /// Absolute floor for adaptive quadrature.
    pub quad_abs: f64,
    /// Slack allowed when checking stochastic ordering of tabulated CDFs.
    pub domination: f64,
    /// Bisection target for hitting times.
    pub hit_time: f64,
    /// Boundary limit is read off once y drops below this.
    pub boundary_y: f64,
    /// Eigenvalues with smaller magnitude abort the replica.
    pub min_eigenvalue: f64,
    /// Root tolerance of the secular phase solver.
    pub phase_root: f64,
}

impl Tolerances {
    pub const DEFAULT: Tolerances = Tolerances {
        det: 1e-12,
        quad_rel: 1e-10,
        quad_abs: 1e-15,
        domination: 1e-8,
        hit_time: 1e-6,
        boundary_y: 1e-6,
        min_eigenvalue: 1e-8,
        phase_root: 1e-10,
    };
}

impl Default for Tolerances {
    fn default() -> Self {
        Self::DEFAULT
    }
}
