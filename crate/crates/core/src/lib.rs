pub mod data;
pub mod langtree;
pub mod model;
pub mod numerics;
pub mod seed;
pub mod training;
pub mod evaluation;
pub mod experiment;
