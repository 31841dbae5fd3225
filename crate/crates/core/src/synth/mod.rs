//! Deterministic sprite scenes and action clips with ground truth.
mod dataset;
mod scene;
mod sprite;

pub use dataset::{
    generate_action_set, item_rng, random_setup, random_sprite, shot_setup, shot_specs, surveillance_scene, ActionSet,
    ActionSetConfig, BACKGROUND_LEVELS,
};
pub use scene::{
    generate_action_clip, generate_scene, generate_shot_video, write_scene_dir, ActionClip, BackgroundSpec, ClipSetup,
    GtObject, SceneOutput, SceneSpec, SceneSprite, ShotSpec, ShotVideo,
};
pub use sprite::{sample, Motion, Pose, SpriteSpec, SpriteTexture, ARM_SWING, BOUNCE_HEIGHT, EXPAND_AMPLITUDE};
