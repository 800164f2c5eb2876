//! Scene descriptors, codebook sidecars and estimate files.
//!
//! A scene descriptor is TOML (or JSON when the extension is `.json`):
//!
//! ```toml
//! mesh = "cube.ply"      # relative to the descriptor
//! image = "input.raw"    # optional encoder input depth; rendered from gt when absent
//! depth = "sensor.png"   # optional sensor depth for ICP and VSD
//!
//! [camera]
//! fx = 572.4
//! fy = 573.6
//! cx = 325.3
//! cy = 242.0
//! width = 640
//! height = 480
//!
//! [[objects]]
//! id = "cube"
//! bbox = [300.0, 200.0, 60.0, 60.0]   # optional; gt silhouette when absent
//! gt_pose = { rotation = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]], translation = [0.0, 0.0, 700.0] }
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{CameraIntrinsics, Pose};
use crate::pipeline::BBox;
use crate::render::{load_mesh, render_depth, render_over, silhouette_bbox, DepthImage, TriangleMesh};

pub const SCENE_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneObject {
    pub id: String,
    pub gt_pose: Pose,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bbox: Option<[f64; 4]>,
}

/// Parsed descriptor; paths are already resolved against its directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneDescriptor {
    pub mesh: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth: Option<PathBuf>,
    pub camera: CameraIntrinsics,
    #[serde(default)]
    pub objects: Vec<SceneObject>,
}

fn parse_structured<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    let parse_err = |line: usize, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    if is_json {
        serde_json::from_str(&text).map_err(|e| parse_err(e.line(), e.to_string()))
    } else {
        toml::from_str(&text).map_err(|e| {
            let line = e.span().map_or(0, |s| text[..s.start].lines().count().max(1));
            parse_err(line, e.message().to_string())
        })
    }
}

impl SceneDescriptor {
    /// Loads and validates a descriptor: intrinsics must be valid and every
    /// referenced file must exist.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut scene: SceneDescriptor = parse_structured(path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        scene.mesh = base.join(&scene.mesh);
        scene.image = scene.image.map(|p| base.join(p));
        scene.depth = scene.depth.map(|p| base.join(p));
        scene.camera.validate()?;
        for file in std::iter::once(&scene.mesh).chain(&scene.image).chain(&scene.depth) {
            if !file.is_file() {
                return Err(Error::Io(std::io::Error::new(
                    std::io::ErrorKind::NotFound,
                    format!("{} does not exist", file.display()),
                )));
            }
        }
        for obj in &scene.objects {
            if !obj.gt_pose.is_finite() || obj.gt_pose.translation.z <= 0.0 {
                return Err(Error::bounds(
                    "gt pose",
                    format!("object {} is not in front of the camera", obj.id),
                ));
            }
        }
        Ok(scene)
    }

    pub fn load_mesh(&self) -> Result<TriangleMesh> {
        load_mesh(&self.mesh)
    }

    /// Encoder input depth: the `image` file, or all objects rendered at their gt poses.
    pub fn input_depth(&self, mesh: &TriangleMesh) -> Result<DepthImage> {
        match &self.image {
            Some(p) => self.checked_depth(DepthImage::load(p)?),
            None => Ok(self.render_gt(mesh)),
        }
    }

    /// Sensor depth, if the descriptor names one.
    pub fn sensor_depth(&self) -> Result<Option<DepthImage>> {
        self.depth
            .as_ref()
            .map(|p| DepthImage::load(p).and_then(|d| self.checked_depth(d)))
            .transpose()
    }

    fn checked_depth(&self, d: DepthImage) -> Result<DepthImage> {
        if d.width != self.camera.width as usize || d.height != self.camera.height as usize {
            return Err(Error::Dimension {
                expected: self.camera.pixel_count(),
                actual: d.data.len(),
            });
        }
        Ok(d)
    }

    /// All objects rendered into one z-buffer.
    pub fn render_gt(&self, mesh: &TriangleMesh) -> DepthImage {
        let mut depth = DepthImage::new(self.camera.width as usize, self.camera.height as usize);
        for obj in &self.objects {
            render_over(mesh, &obj.gt_pose, &self.camera, &mut depth);
        }
        depth
    }

    /// Detection box of object `i`: the given bbox, or its gt silhouette.
    pub fn bbox(&self, mesh: &TriangleMesh, i: usize) -> Result<BBox> {
        let obj = &self.objects[i];
        match obj.bbox {
            Some([x, y, w, h]) => Ok(BBox::new(x, y, w, h)),
            None => silhouette_bbox(&render_depth(mesh, &obj.gt_pose, &self.camera))
                .map(BBox::from)
                .ok_or_else(|| Error::DegenerateBbox(format!("object {} is not visible", obj.id))),
        }
    }
}

/// Settings a codebook was rendered with, stored next to it as `<file>.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodebookMeta {
    pub schema_version: u32,
    pub level: u32,
    pub inplane: usize,
    pub entries: usize,
    pub t_syn_z: f64,
    pub camera: CameraIntrinsics,
    pub padding: f64,
    pub crop: usize,
    pub depth_range: f64,
}

impl CodebookMeta {
    pub fn sidecar(codebook: &Path) -> PathBuf {
        let mut name = codebook.as_os_str().to_owned();
        name.push(".json");
        PathBuf::from(name)
    }

    pub fn load(codebook: &Path) -> Result<Self> {
        parse_structured(&Self::sidecar(codebook))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectEstimate {
    pub index: usize,
    pub object_id: String,
    pub pose: Pose,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub refined_pose: Option<Pose>,
}

impl ObjectEstimate {
    /// The refined pose when present.
    pub fn best(&self) -> &Pose {
        self.refined_pose.as_ref().unwrap_or(&self.pose)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneEstimates {
    /// Descriptor file name, matched against the evaluation directory.
    pub scene: String,
    pub estimates: Vec<ObjectEstimate>,
}

/// Output of `estimate`, input of `evaluate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateFile {
    pub schema_version: u32,
    pub scenes: Vec<SceneEstimates>,
}

impl EstimateFile {
    pub fn load(path: &Path) -> Result<Self> {
        let file: EstimateFile = parse_structured(path)?;
        if file.schema_version != SCENE_SCHEMA_VERSION {
            return Err(Error::UnsupportedVersion(file.schema_version));
        }
        Ok(file)
    }
}
