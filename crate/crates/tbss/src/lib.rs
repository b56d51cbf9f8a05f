//! Reconstruction of noisy tubular-boundary segmentations by tube beam stack
//! search (TBSS).
//!
//! The input is a pair of per-voxel probability volumes — one per boundary of
//! a vessel wall (inner/lumen and outer) — produced by some upstream
//! segmentation model over straightened cross-section slices. Raw
//! thresholding of such maps leaves gaps where the model was unsure and
//! speckles where it was wrong. TBSS instead treats each boundary as a stack
//! of slices and searches for voxel paths that run through the whole stack:
//!
//! 1. [`search`] — the volume is cut into sections of `M` consecutive slices;
//!    within a section, paths step between slices inside a `beam × beam`
//!    window, keep at most `S` children per node, and must hold their
//!    cumulative log-probability above a per-boundary threshold at every
//!    prefix. The union of surviving paths, searched in both slice
//!    directions and over both channels, is merged into a label volume
//!    (inner = 1, outer = 2, inner wins conflicts).
//! 2. [`morphology`] — each reconstructed slice region is thinned to its
//!    medial curve (two-subiteration thinning) and reduced to its inside
//!    contour (hole border of the enclosed lumen, with an outer-border
//!    fallback for open arcs) by border following.
//! 3. [`metrics`] — contours are scored against ground truth with the
//!    symmetric Hausdorff distance, averaged per channel and split into
//!    healthy/unhealthy slice strata.
//! 4. [`baseline`] — global Otsu (or fixed) thresholding of the same
//!    volumes, for comparison.
//! 5. [`phantom`] — a seeded generator of synthetic two-ring tube volumes
//!    with controllable radius profiles, eccentricity, blur, noise and
//!    boundary dropouts, so the whole pipeline can be evaluated
//!    quantitatively without clinical data.
//! 6. [`volume`] — the shared voxel containers and their binary file format.
//!
//! Everything is deterministic: searches and refinements are pure given
//! their inputs, and generation is pure given the seed, regardless of thread
//! count.
//!
//! ```
//! use tbss::phantom::{generate, Eccentricity, PhantomSpec, RadiusProfile};
//! use tbss::search::{reconstruct_artery, SearchParams};
//! use tbss::morphology::refine_labels;
//! use tbss::metrics::evaluate;
//!
//! let spec = PhantomSpec {
//!     slices: 16,
//!     rows: 48,
//!     cols: 48,
//!     inner_radius: RadiusProfile::Constant { radius: 9.0 },
//!     outer_radius: RadiusProfile::Constant { radius: 16.0 },
//!     eccentricity: Eccentricity::default(),
//!     blur_sigma: 0.0,
//!     noise_amp: 0.0,
//!     holes: Vec::new(),
//!     seed: 1,
//! };
//! let phantom = generate(&spec).unwrap();
//! let labels = reconstruct_artery(&phantom.inner, &phantom.outer, &SearchParams::default())
//!     .unwrap();
//! let contours = refine_labels(&labels);
//! let report = evaluate(&contours, &phantom.gt, &phantom.meta, None).unwrap();
//! assert!(report.cell(tbss::volume::INNER, true).mean_voxels.unwrap() <= 1.5);
//! ```

pub mod baseline;
pub mod metrics;
pub mod morphology;
pub mod phantom;
pub mod search;
pub mod volume;

pub use morphology::refine_labels;
pub use search::{reconstruct_artery, SearchParams};
pub use volume::{Dims, LabelVolume, ProbabilityVolume};
