pub mod constcoeff;
pub mod diag;
pub mod dissipative;
pub mod fit;
pub mod floquet;
pub mod geometry;
pub mod linalg;
pub mod models;
pub mod ode;
pub mod phasespace;
pub mod propagate;
pub mod quad;
pub mod scalar;
pub mod specfun;
