//! Block-based intra codec: prediction, transform, entropy coding, mode
//! decision and the in-loop filter hook.

pub mod entropy;
pub mod frame;
pub mod io;
pub mod models;
pub mod plane;
pub mod predict;
pub mod rdo;
pub mod refs;
pub mod transform;

pub use entropy::{entropy_decode_block, entropy_encode_block, BitReader, BitWriter, BlockMode};
pub use frame::{
    decode_frame, decode_stream, encode_frame, filter_block, CodecConfig, Decoded, Encoded, Header, ModeStats,
    BLOCK_SIZE,
};
pub use io::{read_pgm, read_yuv420, write_pgm, write_yuv420, write_yuv420_frames, yuv420_frame_count};
pub use models::ModelSet;
pub use plane::{chroma_size, Frame, Plane};
pub use predict::{predict_intra, predict_neural};
pub use rdo::{lambda, rd_select_mode, BlockCoder, CodedBlock, NeuralInput};
pub use refs::{gather_context, gather_references, RefArray};
pub use transform::{dct2d, dequantize, quantize, QuantParams};
