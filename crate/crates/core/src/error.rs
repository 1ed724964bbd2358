use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("|ξ| = {0} is outside the open interval ]-1, 1[")]
    PhiDomain(f64),
    #[error("weight sign structure cannot be decomposed into finitely many intervals")]
    DecompositionFailure,
    #[error("no admissible rho on the dyadic search grid")]
    NoAdmissibleRho,
    #[error("average map vanishes at an endpoint of ]-{0}, {0}[")]
    DegreeUndefined(f64),
    #[error("step size underflow at t = {t}")]
    StepSizeUnderflow { t: f64 },
    #[error("Newton did not converge in {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("singular shooting Jacobian (condition estimate {0:e})")]
    SingularJacobian(f64),
    #[error("maximum principle violated: min u = {min_u:e}")]
    MaximumPrinciple { min_u: f64 },
    #[error("verification check ({item}) failed: {value:e} exceeds {bound:e}")]
    VerificationFailed { item: u8, value: f64, bound: f64 },
    #[error("corrector diverged; last good point at lambda = {lambda}")]
    CorrectorDivergence { lambda: f64, x0: [f64; 2] },
    #[error("branch lost at lambda = {0}")]
    BranchLost(f64),
    #[error("no sign change of the rotation gap for |mu| <= 1e6")]
    BracketFailure,
    #[error("cannot linearize around the trivial orbit")]
    TrivialOrbit,
    #[error("zero of u - u_s near t = {0} is not transversal")]
    TangentialZero(f64),
    #[error("no subharmonic of the requested type within the seed budget")]
    NotFound,
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    /// Input rejected before any numerics ran.
    pub fn is_validation(&self) -> bool {
        matches!(self, Error::Invalid(_) | Error::PhiDomain(_) | Error::TrivialOrbit)
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Error::Invalid(_) => "invalid",
            Error::PhiDomain(_) => "phi_domain",
            Error::DecompositionFailure => "decomposition_failure",
            Error::NoAdmissibleRho => "no_admissible_rho",
            Error::DegreeUndefined(_) => "degree_undefined",
            Error::StepSizeUnderflow { .. } => "step_size_underflow",
            Error::NoConvergence { .. } => "no_convergence",
            Error::SingularJacobian(_) => "singular_jacobian",
            Error::MaximumPrinciple { .. } => "maximum_principle",
            Error::VerificationFailed { .. } => "verification_failed",
            Error::CorrectorDivergence { .. } => "corrector_divergence",
            Error::BranchLost(_) => "branch_lost",
            Error::BracketFailure => "bracket_failure",
            Error::TrivialOrbit => "trivial_orbit",
            Error::TangentialZero(_) => "tangential_zero",
            Error::NotFound => "not_found",
        }
    }
}
