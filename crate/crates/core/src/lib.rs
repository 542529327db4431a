pub mod cauchy;
pub mod chained;
pub mod cli;
pub mod triangular;
pub mod diffgeo;
pub mod flags;
pub mod harness;
pub mod linalg;
pub mod symx;
pub mod system;
