// SPDX-License-Identifier: Apache-2.0

pub mod backend;
pub mod behav;
pub mod classify;
pub mod cli;
pub mod comb;
pub mod domain;
pub mod eval;
pub mod extraction;
pub mod search;
pub mod sequ;
pub mod sim;
pub mod verilog;
