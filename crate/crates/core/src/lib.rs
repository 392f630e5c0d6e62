pub mod ckg;
pub mod corpus;
pub mod evalkit;
pub mod medner;
pub mod search;
pub mod synth;
pub mod text;
pub mod topics;
