use super::RenderError;
use nalgebra::{Matrix3, Vector3};

/// Pinhole camera, OpenGL-style axes: x right, y up, looking along -z in
/// camera space. `rotation`/`translation` map camera to world.
#[derive(Debug, Clone, PartialEq)]
pub struct Camera {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ray {
    pub origin: Vector3<f64>,
    pub direction: Vector3<f64>,
    pub t_near: f64,
    pub t_far: f64,
}

impl Camera {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        width: u32,
        height: u32,
        rotation: Matrix3<f64>,
        translation: Vector3<f64>,
    ) -> Result<Self, RenderError> {
        if fx <= 0.0 || fy <= 0.0 {
            return Err(RenderError::BadFocal(fx, fy));
        }
        let gram_err = (rotation.transpose() * rotation - Matrix3::identity()).abs().max();
        let det_err = (rotation.determinant() - 1.0).abs();
        let err = gram_err.max(det_err);
        if err > 1e-5 {
            return Err(RenderError::BadRotation(err));
        }
        Ok(Camera {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
            rotation,
            translation,
        })
    }

    /// Camera with the image center as principal point and a horizontal
    /// field of view in radians: fx = width / (2 tan(fov/2)), square pixels.
    pub fn from_fov(
        fov_x: f64,
        width: u32,
        height: u32,
        rotation: Matrix3<f64>,
        translation: Vector3<f64>,
    ) -> Result<Self, RenderError> {
        let fx = width as f64 / (2.0 * (fov_x / 2.0).tan());
        Camera::new(
            fx,
            fx,
            width as f64 / 2.0,
            height as f64 / 2.0,
            width,
            height,
            rotation,
            translation,
        )
    }

    pub fn fov_x(&self) -> f64 {
        2.0 * (self.width as f64 / (2.0 * self.fx)).atan()
    }

    /// Unit-direction ray through an arbitrary (sub)pixel position.
    pub fn ray_at(&self, px: f64, py: f64) -> Ray {
        let dir_cam = Vector3::new(
            (px - self.cx) / self.fx,
            -(py - self.cy) / self.fy,
            -1.0,
        );
        let direction = (self.rotation * dir_cam).normalize();
        Ray {
            origin: self.translation,
            direction,
            t_near: 0.0,
            t_far: f64::INFINITY,
        }
    }

    /// Projects a world point to pixel coordinates (same continuous
    /// convention as `ray_at`); None when behind the camera.
    pub fn project(&self, p: &Vector3<f64>) -> Option<(f64, f64)> {
        let cam = self.rotation.transpose() * (p - self.translation);
        if cam.z >= -1e-12 {
            return None;
        }
        let u = self.cx + self.fx * (cam.x / -cam.z);
        let v = self.cy - self.fy * (cam.y / -cam.z);
        Some((u, v))
    }
}

/// Rays through the centers of the requested pixels ((u + 0.5, v + 0.5)).
pub fn generate_rays(camera: &Camera, pixels: &[(u32, u32)]) -> Result<Vec<Ray>, RenderError> {
    pixels
        .iter()
        .map(|&(u, v)| {
            if u >= camera.width || v >= camera.height {
                return Err(RenderError::PixelOutOfBounds(
                    u,
                    v,
                    camera.width,
                    camera.height,
                ));
            }
            Ok(camera.ray_at(u as f64 + 0.5, v as f64 + 0.5))
        })
        .collect()
}
