pub mod compare;
pub mod eam;
pub mod predict;
pub mod screen;
pub mod train;
