//! Numerics on multi-Taub-NUT spaces: the Gibbons–Hawking metric, abelian
//! anti-self-dual instantons, fiber holonomy, Chern–Weil integrals and the
//! closed-form L² index of the coupled Dirac operator.
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod chernweil;
pub mod exec;
pub mod fd;
pub mod forms;
pub mod geometry;
pub mod holonomy;
pub mod index;
pub mod instanton;
pub mod quad;

pub use error::{Error, Result};
pub use exec::Exec;
pub use forms::{Orientation, TwoForm};
pub use geometry::{FramePoint, GhSpace, PatchChart, Side};
