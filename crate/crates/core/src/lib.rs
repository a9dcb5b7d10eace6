//! Coordinated-community detection and propaganda-spread analytics.
//!
//! The pipeline runs from a tweet corpus to a co-retweet similarity network,
//! its disparity backbone, Louvain communities and dismantling-based
//! coordination scores; a logistic-regression text classifier scores tweets
//! and articles, and the scores are aggregated per user and per community as a
//! function of coordination.
//!
//! Numeric modules are generic over [`Scalar`] (`f32` or `f64`); the aliases
//! at the crate root fix the scalar to `f64`.

// `!(x >= 0)` style checks are meant to reject NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod communities;
pub mod corpus;
pub mod error;
pub mod measures;
pub mod propaganda;
pub mod scalar;
pub mod simnet;
pub mod stats;
pub mod synth;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type SimilarityNetwork = simnet::SimilarityNetwork<f64>;
pub type RetweetVectors = simnet::RetweetVectors<f64>;
pub type BackboneParams = simnet::BackboneParams<f64>;
pub type CoordinationScores = communities::CoordinationScores<f64>;
pub type LouvainParams = communities::LouvainParams<f64>;
pub type TrendSeries = measures::TrendSeries<f64>;
pub type UserPropaganda = measures::UserPropaganda<f64>;
pub type PropagandaModel = propaganda::PropagandaModel<f64>;
pub type ItemScore = propaganda::ItemScore<f64>;
