//! Density-aware distances on point clouds.
//!
//! The *sample Fermat distance* between two particles of a finite cloud `Q`
//! is the cheapest chain of particles joining them, where a hop of Euclidean
//! length `g` costs `g^alpha` for some `alpha >= 1`. Large hops are
//! penalized, so shortest chains hug dense regions of the cloud. After the
//! scaling `n^beta` with `beta = (alpha - 1) / d` the distance converges to a
//! macroscopic path functional `inf_gamma ∫_gamma f^-beta`, where `f` is the
//! sampling density.
//!
//! Crate layout:
//!
//! | Module | Contents |
//! |--------|----------|
//! | [`point`] | point clouds, kd-tree index, Voronoi anchors, kNN, curve metric |
//! | [`sampler`] | Poisson / i.i.d. / manifold sampling, density and domain catalog |
//! | [`fermat`] | exact and kNN-restricted distances, landmark bounds, balls |
//! | [`continuum`] | lattice oracle for the macroscopic distance and its geodesics |
//! | [`harness`] | Monte Carlo experiments and their CSV output |
//!
//! ```
//! use fermat_core::{Alpha, PointCloud, SpatialIndex, exact_distance};
//!
//! let cloud = PointCloud::from_rows(vec![vec![0.0], vec![0.5], vec![1.0]]).unwrap();
//! let index = SpatialIndex::build(&cloud).unwrap();
//! let res = exact_distance(&index, Alpha::new(2.0).unwrap(), &[0.0], &[1.0]).unwrap();
//! assert_eq!(res.distance, 0.5);
//! assert_eq!(res.path.indices(), &[0, 1, 2]);
//! ```

pub mod continuum;
pub mod error;
pub mod fermat;
pub mod harness;
pub mod io;
pub mod point;
pub mod rng;
pub mod sampler;
pub mod svg;

pub use continuum::{
    build_grid_oracle, continuum_ball, continuum_distance, continuum_geodesic, Beta,
    ContinuumBall, ContinuumResult, GridOracle, OracleParams,
};
pub use error::{Error, Result};
pub use fermat::{
    all_pairs_restricted, exact_distance, exact_distance_between, fermat_ball, landmark_bounds,
    path_statistics, restricted_distance, Alpha, DistanceMatrix, DistanceResult, FermatBall,
    GraphMode, KnnGraph, LandmarkBounds, LandmarkTable, PathStatistics, Symmetrization,
};
pub use point::{curve_distance, CurveMetricValue, FermatPath, PointCloud, SpatialIndex};
pub use sampler::{
    sample_iid, sample_manifold, sample_poisson, DensityField, DensitySpec, DomainSpec,
    ManifoldSpec, Provenance, SampleBatch,
};
