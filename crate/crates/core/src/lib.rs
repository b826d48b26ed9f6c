//! Conversion of linear second-order PDEs on an interval into partial-integral
//! form, with stability certification by semidefinite programming.

pub mod bcspace;
pub mod cli;
pub mod convert;
pub mod error;
pub mod legendre;
pub mod linalg;
pub mod lpi;
pub mod maps;
pub mod piop;
pub mod polymat;
pub mod sdp;
pub mod specfile;
pub mod spectral;
pub mod textio;

pub use bcspace::{BoundarySpec, SplitBoundary, GH};
pub use convert::{pde_to_pie, PdeSystem, PieSystem, Trajectory};
pub use error::{PieError, Result};
pub use linalg::DMat;
pub use maps::StateMaps;
pub use piop::{Dims, PiOp};
pub use polymat::{Bound, Coeff, Interval, Point, Poly, PolyMat, Rational, Var};
