//! The hardware-efficient guided filter.
//!
//! Per window `Ω_p` the filter fits a ridge regression of the input `Y` on
//! the guidance channels plus a constant, then averages the fitted
//! coefficients over overlapping windows. The per-pixel matrix inverse
//! `(λE + Σ_i c_i c_iᵀ)⁻¹` never gets formed. It is expressed as
//! `λ⁻¹E + Σ_ij α_ij c_i c_jᵀ`, where the `α` planes come out of a sequence
//! of rank-one (Sherman-Morrison) updates driven only by Gram planes
//! `G_ij = box(G_i · G_j)`. Every stage is therefore either a box filter or
//! pointwise arithmetic.
//!
//! Two details differ from the way the recursion is often written down and
//! are pinned by the inverse-identity tests:
//!
//! * the initial coefficient is `α_00 = -λ⁻¹ / (λ + G_00)`, i.e. the general
//!   `λ⁻²γ` diagonal case evaluated at the first channel;
//! * the `i, j < κ` case is `α_ij + γ u_i v_j`. Dropping `γ` there does not
//!   produce an inverse.
//!
//! [`direct_ridge_filter`] solves every window densely and is the reference
//! the fast path is checked against.

mod alpha;
mod filter;
mod gram;
mod oracle;
mod params;
mod weights;

pub use alpha::{alpha_init, alpha_step, AlphaTable};
pub use filter::{hgf_filter, hgf_filter_profiled, HgfPlan, StageTimes};
pub use gram::{compute_gram, compute_guidance_gram, GramTable};
pub use oracle::{direct_ridge_filter, direct_ridge_weights, naive_aggregate, ridge_oracle};
pub use params::FilterParams;
pub use weights::{aggregate, compute_weights, WeightStack};
