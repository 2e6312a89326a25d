pub mod nncore;
pub mod nonideal;
pub mod devices;
pub mod archmodel;
pub mod experiment;
