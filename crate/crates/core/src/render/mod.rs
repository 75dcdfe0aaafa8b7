//! Visual-prompt rendering and the raster helpers shared with the synthetic
//! generator.

pub mod font;
mod index;
pub mod raster;
mod visual_prompt;

pub use index::{assign_indices, reading_order, BoxIndex};
pub use raster::PixelRect;
pub use visual_prompt::{
    box_to_pixels, decode_image, encode_png, render_visual_prompt, render_visual_prompt_bytes, LabelCorner, LabelPlacement,
    RenderError, VisualPrompt, VisualPromptStyle,
};
