//! Scan ingestion and export.

mod kitti;
pub mod ply;

pub use kitti::{
    decode_kitti_bin, decode_kitti_labels, encode_kitti_bin, encode_kitti_labels, read_kitti_bin,
    read_kitti_frame, read_kitti_labels, write_kitti_bin, write_kitti_labels, BinScan,
    KITTI_LABEL_BYTES, KITTI_POINT_BYTES,
};
pub use ply::{color_for, write_colored_ply, write_colored_ply_to, PlyFormat, Rgb};
