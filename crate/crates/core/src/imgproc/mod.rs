//! Raster substrate: planes, color images, codecs, filtering and pyramids.

mod codec;
mod filter;
mod plane;
mod pyramid;

pub use codec::{decode_gray_png, decode_image, encode_gray_png, encode_ppm, encode_rgb_png};
pub use filter::{
    convolve_separable, gaussian_blur, gaussian_taps, reflect_index, resample_affine, resize_bilinear,
    resize_plane,
};
pub use plane::{ColorImage, ImagePlane};
pub use pyramid::{
    gaussian_pyramid, max_levels, oriented_energies, oriented_responses, pyr_down,
    resample_level, steerable_subbands, subband_pyramid, LevelGeometry, Pyramid, PyramidKind,
    ENERGY_SIGMA, ORIENTATIONS, ORIENTED_SIGMA,
};
