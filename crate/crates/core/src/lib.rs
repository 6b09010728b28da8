//! MothNet: a model of the insect antennal lobe / mushroom body used as a
//! feature generator in front of standard classifiers ("cyborgs").
//!
//! The crate is organised bottom-up:
//!
//! - [`dataset`]: IDX / image-directory ingestion, vectorising preprocessing
//!   and seeded per-class splits.
//! - [`mothnet`]: network templates and instances, the time-stepped
//!   AL → MB → readout dynamics, Hebbian training and log-likelihood
//!   prediction.
//! - [`classifiers`]: nearest neighbours, one-vs-rest linear SVM and a
//!   one-hidden-layer MLP behind a common fit/predict contract.
//! - [`featuregen`]: PCA, PLS, NN-output and MothNet feature generators and
//!   the cyborg feature assembly.
//! - [`experiments`]: the repeated few-shot protocol, effect-size statistics,
//!   data-savings analysis and report tables.
//!
//! Batch work (suite cells, per-sample feature extraction) goes through
//! [`par`], which uses rayon when the `parallel` feature is enabled and
//! plain iterators otherwise.

pub mod classifiers;
pub mod dataset;
pub mod error;
pub mod experiments;
pub mod featuregen;
pub mod mothnet;
pub mod par;
pub mod rng;
pub mod selftest;

pub use error::{Error, Result};
