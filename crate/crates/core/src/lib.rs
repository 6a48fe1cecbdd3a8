//! Guided image filtering where every stage is a box filter or pointwise
//! arithmetic.
//!
//! The crate is organised bottom-up:
//!
//! * [`image`] and [`io`]: planes, channel stacks, PGM/PPM/PFM files;
//! * [`boxfilter`]: clipped-window box sums over summed-area tables;
//! * [`guidance`]: polynomial multichannel guidance;
//! * [`engine`]: the filter itself plus a dense reference solver;
//! * [`gf`]: the classical guided filter, fast and naive;
//! * [`multilabel`]: cost volumes, winner-takes-all, bad-pixel scoring;
//! * [`fixtures`], [`fitdemo`], [`bench`]: synthetic data, the curve
//!   fitting demo and the benchmark harness used by the CLI.

pub mod bench;
pub mod boxfilter;
pub mod engine;
pub mod error;
pub mod fitdemo;
pub mod fixtures;
pub mod gf;
pub mod guidance;
pub mod image;
pub mod io;
pub mod linalg;
pub mod multilabel;

pub use boxfilter::{box_average, box_sum, WindowSpec};
pub use engine::{direct_ridge_filter, hgf_filter, FilterParams, HgfPlan};
pub use error::{Error, Result};
pub use gf::{gf_filter, naive_gf_filter};
pub use guidance::{synthesize_polynomial_guidance, PolynomialSpec};
pub use image::{ChannelStack, ImagePlane, PixelCoord};
pub use io::{load_image, save_image, ImageFormat};
