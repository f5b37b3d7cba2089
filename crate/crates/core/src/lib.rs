pub mod compiler;
pub mod corpus;
pub mod driver;
pub mod engine;
pub mod abduction;
pub mod assumptions;
pub mod reader;
pub mod scaling;
pub mod source;
pub mod term;
