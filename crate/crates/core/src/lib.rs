pub mod algebra;
pub mod games;
pub mod poly;
pub mod sdp;
