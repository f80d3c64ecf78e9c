//! Detection of nonlinearly mixed pixels in hyperspectral images and
//! endmember estimation that tolerates nonlinear mixtures.
//!
//! Each pixel is fitted twice over the rows of the endmember matrix: by a
//! linear projector and by Gaussian-process regression. The statistic
//! `T = 2 |e_gp|^2 / (|e_gp|^2 + |e_lin|^2)` falls below a beta-calibrated
//! threshold when the nonlinear fit explains markedly more of the pixel.

pub mod detector;
pub mod error;
pub mod extraction;
pub mod gp;
pub mod io;
pub mod lp;
pub mod mixing;
pub mod rng;
pub mod scene;
pub mod special;
pub mod unmix;

pub use error::{Error, Result};
