pub mod dynamics;
pub mod fields;
pub mod flows;
pub mod generators;
pub mod observables;
pub mod poly;
pub mod qgrid;
pub mod weyl;
