//! Harness for exploring interactive webpages into verified interaction
//! graphs, validating generated pages by executing tasks against them, and
//! scoring agents and pipelines.
//!
//! The crate is organized around a perception-action-verification loop: an
//! environment ([`env`]) renders pages and executes actions, a policy
//! ([`policy`]) proposes and verifies interactions, and the explorer
//! ([`explorer`]) grows an [`graph::InteractionGraph`] until its budget is
//! spent. The [`validator`] replays tasks against generated pages, and
//! [`metrics`] scores traces against fixture ground truth from [`corpus`].

pub mod corpus;
pub mod dom;
pub mod dsl;
pub mod env;
pub mod exec;
pub mod explorer;
pub mod graph;
pub mod metrics;
pub mod policy;
pub mod validator;
