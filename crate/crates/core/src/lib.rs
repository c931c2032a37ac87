// SPDX-License-Identifier: Apache-2.0

pub mod cli;
pub mod mir;
pub mod pipeline;
pub mod s3;
pub mod symexec;
pub mod symgraph;
