//! Shared by the integration tests here and by the workspace acceptance
//! suite.

#![allow(dead_code)]

pub mod checks;
pub mod dag;
