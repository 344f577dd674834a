//! Scene manifests: key/value files naming VGRD1 grids per field and channel
//! plus light, background and camera settings.
//!
//! A field key is either per channel (`sigma_t.r`, `sigma_t.g`, `sigma_t.b`)
//! or shared by all three (`sigma_t`). Relative paths resolve against the
//! manifest's directory.

use std::path::{Path, PathBuf};

use fld_core::lightbake::DirectionalLight;
use fld_core::raymarch::Camera;
use fld_core::scenes::{default_camera, Medium, Scene};
use fld_core::{ScalarField, Vec3};

use crate::config::KeyValues;
use crate::error::{CliError, CliResult};
use crate::vgrd;

pub const CHANNELS: [&str; 3] = ["r", "g", "b"];

#[derive(Debug, Clone)]
pub struct Manifest {
    dir: PathBuf,
    kv: KeyValues,
}

impl Manifest {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self {
            dir: dir.into(),
            kv: KeyValues::default(),
        }
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        if !path.is_file() {
            return Err(CliError::usage(format!("manifest {} not found", path.display())));
        }
        let kv = KeyValues::load(path)?;
        let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(Self { dir, kv })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn keys(&self) -> &KeyValues {
        &self.kv
    }

    pub fn set(&mut self, key: impl Into<String>, value: impl Into<String>) {
        self.kv.insert(key, value);
    }

    /// Moves the manifest to `dir`, rewriting relative field paths so they
    /// still point at the same files.
    pub fn relocate(&self, dir: &Path) -> Manifest {
        let mut out = Manifest::new(dir);
        for (k, v) in self.kv.iter() {
            let value = if is_field_key(k) {
                let p = Path::new(v);
                let abs = if p.is_absolute() { p.to_path_buf() } else { self.dir.join(p) };
                relative_to(&abs, dir)
            } else {
                v.to_string()
            };
            out.kv.insert(k, value);
        }
        out
    }

    pub fn save(&self, path: &Path) -> CliResult<()> {
        std::fs::write(path, self.kv.to_text())?;
        Ok(())
    }

    fn resolve(&self, value: &str) -> PathBuf {
        let p = Path::new(value);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.dir.join(p)
        }
    }

    /// Grid paths of `field` per channel, if the manifest names it.
    pub fn field_paths(&self, field: &str) -> CliResult<Option<[PathBuf; 3]>> {
        let shared = self.kv.get(field);
        let per: Vec<Option<&str>> = CHANNELS.iter().map(|c| self.kv.get(&format!("{field}.{c}"))).collect();
        match (shared, per.iter().all(Option::is_some), per.iter().any(Option::is_some)) {
            (Some(_), _, true) => Err(CliError::usage(format!("{field}: both shared and per-channel keys given"))),
            (Some(s), _, false) => {
                let p = self.resolve(s);
                Ok(Some([p.clone(), p.clone(), p]))
            }
            (None, true, _) => Ok(Some(core::array::from_fn(|c| self.resolve(per[c].unwrap())))),
            (None, false, true) => Err(CliError::usage(format!("{field}: per-channel keys must cover r, g and b"))),
            (None, false, false) => Ok(None),
        }
    }

    /// Loads the three channel grids of `field`, reading shared files once.
    pub fn load_field(&self, field: &str) -> CliResult<Option<[ScalarField; 3]>> {
        let Some(paths) = self.field_paths(field)? else {
            return Ok(None);
        };
        let mut loaded: Vec<(PathBuf, ScalarField)> = Vec::new();
        let mut out = Vec::with_capacity(3);
        for p in paths {
            if let Some((_, f)) = loaded.iter().find(|(q, _)| *q == p) {
                out.push(f.clone());
                continue;
            }
            if !p.is_file() {
                return Err(CliError::usage(format!("{field}: grid file {} not found", p.display())));
            }
            let f = vgrd::load(&p).map_err(|e| CliError::usage(format!("{}: {e}", p.display())))?;
            loaded.push((p, f.clone()));
            out.push(f);
        }
        Ok(Some(out.try_into().unwrap()))
    }

    pub fn require_field(&self, field: &str) -> CliResult<[ScalarField; 3]> {
        self.load_field(field)?
            .ok_or_else(|| CliError::usage(format!("manifest does not name a '{field}' field")))
    }

    /// Writes three channel grids as `<base>.vgrd` when identical or
    /// `<base>.<c>.vgrd` otherwise, and records them.
    pub fn write_field(&mut self, field: &str, grids: &[ScalarField; 3]) -> CliResult<()> {
        for c in CHANNELS {
            self.kv.remove(&format!("{field}.{c}"));
        }
        self.kv.remove(field);
        if grids[0] == grids[1] && grids[1] == grids[2] {
            let name = format!("{field}.vgrd");
            vgrd::save(&self.dir.join(&name), &grids[0])?;
            self.kv.insert(field, name);
        } else {
            for (c, g) in CHANNELS.iter().zip(grids) {
                let name = format!("{field}.{c}.vgrd");
                vgrd::save(&self.dir.join(&name), g)?;
                self.kv.insert(format!("{field}.{c}"), name);
            }
        }
        Ok(())
    }

    pub fn light(&self) -> CliResult<Option<DirectionalLight>> {
        let dir = self.kv.triple("light.direction")?;
        let radiance = self.kv.triple("light.radiance")?;
        match (dir, radiance) {
            (None, None) => Ok(None),
            (Some(d), r) => Ok(Some(DirectionalLight::new(r.unwrap_or([1.0; 3]), Vec3::from_array(d))?)),
            (None, Some(_)) => Err(CliError::usage("light.radiance given without light.direction")),
        }
    }

    pub fn set_light(&mut self, light: &DirectionalLight) {
        self.kv.insert("light.direction", fmt_triple(light.direction.to_array()));
        self.kv.insert("light.radiance", fmt_triple(light.radiance));
    }

    pub fn camera(&self) -> CliResult<Camera> {
        let def = default_camera(64, 64);
        let position = self.kv.triple("camera.position")?.map(Vec3::from_array).unwrap_or(def.position);
        let target = self
            .kv
            .triple("camera.target")?
            .map(Vec3::from_array)
            .unwrap_or(def.position + def.forward);
        let up = self.kv.triple("camera.up")?.map(Vec3::from_array).unwrap_or(def.up);
        let vfov = self.kv.parsed("camera.vfov")?.unwrap_or(def.vfov);
        let width = self.kv.parsed("camera.width")?.unwrap_or(def.width);
        let height = self.kv.parsed("camera.height")?.unwrap_or(def.height);
        Ok(Camera::look_at(position, target, up, vfov, width, height)?)
    }

    pub fn set_camera(&mut self, cam: &Camera) {
        self.kv.insert("camera.position", fmt_triple(cam.position.to_array()));
        self.kv.insert("camera.target", fmt_triple((cam.position + cam.forward).to_array()));
        self.kv.insert("camera.up", fmt_triple(cam.up.to_array()));
        self.kv.insert("camera.vfov", cam.vfov.to_string());
        self.kv.insert("camera.width", cam.width.to_string());
        self.kv.insert("camera.height", cam.height.to_string());
    }

    pub fn background(&self) -> CliResult<[f64; 3]> {
        Ok(self.kv.triple("background")?.unwrap_or([0.0; 3]))
    }

    /// Assembles the scene from `sigma_t`, `albedo` and the optional `emission`.
    pub fn scene(&self) -> CliResult<Scene> {
        let sigma = self.require_field("sigma_t")?;
        let albedo = self.require_field("albedo")?;
        let emission = match self.load_field("emission")? {
            Some(e) => e,
            None => sigma.clone().map(|s| ScalarField::zeros(s.dims())),
        };
        let [s0, s1, s2] = sigma;
        let [a0, a1, a2] = albedo;
        let [e0, e1, e2] = emission;
        let scene = Scene {
            channels: [
                Medium { sigma_t: s0, albedo: a0, emission: e0 },
                Medium { sigma_t: s1, albedo: a1, emission: e1 },
                Medium { sigma_t: s2, albedo: a2, emission: e2 },
            ],
            light: self.light()?,
            background: self.background()?,
            camera: self.camera()?,
        };
        scene.validate()?;
        Ok(scene)
    }

    /// Writes every field grid of `scene` into the manifest directory.
    pub fn write_scene(&mut self, scene: &Scene) -> CliResult<()> {
        let ch = &scene.channels;
        self.write_field("sigma_t", &[ch[0].sigma_t.clone(), ch[1].sigma_t.clone(), ch[2].sigma_t.clone()])?;
        self.write_field("albedo", &[ch[0].albedo.clone(), ch[1].albedo.clone(), ch[2].albedo.clone()])?;
        if ch.iter().any(|m| m.emission.max() > 0.0) {
            self.write_field("emission", &[ch[0].emission.clone(), ch[1].emission.clone(), ch[2].emission.clone()])?;
        }
        if let Some(l) = &scene.light {
            self.set_light(l);
        }
        self.kv.insert("background", fmt_triple(scene.background));
        self.set_camera(&scene.camera);
        Ok(())
    }
}

const FIELD_KEYS: [&str; 6] = ["sigma_t", "albedo", "emission", "qri", "transmittance", "phi"];

fn is_field_key(k: &str) -> bool {
    let base = k.split('.').next().unwrap_or(k);
    FIELD_KEYS.contains(&base)
}

fn relative_to(path: &Path, dir: &Path) -> String {
    let abs = |p: &Path| std::fs::canonicalize(p).unwrap_or_else(|_| p.to_path_buf());
    let (p, d) = (abs(path), abs(dir));
    match p.strip_prefix(&d) {
        Ok(rel) => rel.display().to_string(),
        Err(_) => p.display().to_string(),
    }
}

pub fn fmt_triple(v: [f64; 3]) -> String {
    format!("{} {} {}", v[0], v[1], v[2])
}
