//! Operations on jets: embeddings between grades, localization, products,
//! linear and bilinear images, composition and the local estimate near a
//! vanishing point.

mod combinatorics;
mod compose;
mod embed;
mod ops;

pub use combinatorics::{sym_group_identity_check, symmetrize_tail, ShuffleCheck};
pub use compose::{compose, compose_levels, compositions, Composition};
pub use embed::{
    embed, embed_constant, general_embed_cap, localization_bound, localization_factor,
    localize_vanishing, quantitative_factor, smooth_lip_bound, EmbedConstant, EmbedVariant,
    Embedding, LocalEstimate, Localization, VANISHING_TOL,
};
pub use ops::{
    bilinear_image, bilinear_levels, cartesian_product, postcompose_linear, precompose_linear,
    project, BilinearMap,
};
