//! Rooftop PV mapping toolkit.
//!
//! The library turns binary PV segmentation masks into georeferenced array
//! footprints, estimates panel orientation from point clouds, infers module
//! layouts and system capacity from a template catalog, and provides the
//! capacity-validation and generation-band metrics used to assess results.
//!
//! Modules follow the processing order:
//!
//! * [`raster`] — georeferenced masks, world files, connected components
//! * [`vectorize`] — mask components to footprint polygons (iterative
//!   rectangle refinement)
//! * [`orientation`] — point-cloud clipping and robust plane fitting
//! * [`layout`] — module template catalog, virtual-grid placement, capacity
//! * [`metrics`] — IoU/Dice, Hausdorff, matching score, validation reports,
//!   generation-band error metrics
//! * [`profile`] — solar position, plane-of-array irradiance, upper-bound
//!   power profiles and baseline scenarios
//! * [`pipeline`] — end-to-end stage orchestration with cached stage state
//!
//! [`geom`] holds the shared polygon kernel and [`io`] the file formats
//! (GeoJSON layers, CSV series, flat config).

pub mod error;
pub mod geom;
pub mod io;
pub mod layout;
pub mod metrics;
pub mod orientation;
pub mod pipeline;
pub mod profile;
pub mod raster;
pub mod vectorize;

pub use error::{Error, Result};
