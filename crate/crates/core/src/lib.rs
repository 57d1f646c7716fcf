//! Automatic coding of discussion-forum posts from topic-model keywords and
//! instructor phrases, agreement checks against a human reference, and
//! epistemic network models built from the resulting codes.

pub mod agreement;
pub mod autocoder;
pub mod corpus;
pub mod ena;
pub mod preprocess;
pub mod rng;
pub mod stats;
pub mod topics;
