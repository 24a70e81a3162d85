#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "p23d/dataset.hpp"
#include "p23d/error.hpp"
#include "p23d/metrics.hpp"
#include "p23d/sampler.hpp"
#include "p23d/train.hpp"

namespace py = pybind11;
using namespace p23d;

namespace {

PointCloud cloud_from_array(const py::array_t<double>& arr) {
  const auto buf = arr.request();
  if (buf.ndim != 2 || buf.shape[1] != 3) {
    throw DataError("point array must have shape (n, 3)");
  }
  PointCloud cloud;
  const double* d = static_cast<const double*>(buf.ptr);
  const auto row = size_t(buf.strides[0] / sizeof(double));
  const auto col = size_t(buf.strides[1] / sizeof(double));
  for (py::ssize_t i = 0; i < buf.shape[0]; ++i) {
    cloud.points.push_back({d[i * row], d[i * row + col], d[i * row + 2 * col]});
  }
  return cloud;
}

py::array_t<double> cloud_to_array(const PointCloud& cloud) {
  py::array_t<double> out({py::ssize_t(cloud.size()), py::ssize_t(3)});
  auto view = out.mutable_unchecked<2>();
  for (size_t i = 0; i < cloud.size(); ++i) {
    view(py::ssize_t(i), 0) = cloud.points[i].x;
    view(py::ssize_t(i), 1) = cloud.points[i].y;
    view(py::ssize_t(i), 2) = cloud.points[i].z;
  }
  return out;
}

OccupancyGrid grid_from_array(const py::array_t<bool>& arr) {
  const auto view = arr.unchecked<3>();
  const int n = int(view.shape(0));
  if (view.shape(1) != n || view.shape(2) != n) {
    throw DataError("occupancy array must be cubic");
  }
  OccupancyGrid grid(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k)
        if (view(i, j, k)) grid.set(i, j, k);
  return grid;
}

py::array_t<bool> grid_to_array(const OccupancyGrid& grid) {
  const int n = grid.n();
  py::array_t<bool> out({n, n, n});
  auto view = out.mutable_unchecked<3>();
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) view(i, j, k) = grid.get(i, j, k);
  return out;
}

}  // namespace

PYBIND11_MODULE(p23d_native, m) {
  m.doc() = "points-to-3D structural pipeline";

  py::register_exception<UsageError>(m, "UsageError");
  py::register_exception<DataError>(m, "DataError");
  py::register_exception<NumericError>(m, "NumericError");

  m.def("load_points", [](const std::string& path) {
    const auto geo = load_geometry(path);
    if (geo.cloud) return cloud_to_array(*geo.cloud);
    Rng rng(0);
    return cloud_to_array(sample_surface(*geo.mesh, 50000, rng));
  });

  m.def(
      "sample_surface",
      [](const std::string& path, int64_t count, uint64_t seed) {
        const auto geo = load_geometry(path);
        if (!geo.mesh) throw DataError("input has no triangles: " + path);
        auto mesh = *geo.mesh;
        normalize_unit_cube(mesh);
        Rng rng(seed);
        return cloud_to_array(sample_surface(mesh, count, rng));
      },
      py::arg("path"), py::arg("count") = 50000, py::arg("seed") = 0);

  m.def(
      "voxelize",
      [](const py::array_t<double>& points, int n) {
        return grid_to_array(voxelize(cloud_from_array(points), n).grid);
      },
      py::arg("points"), py::arg("n") = 16);

  m.def("voxel_centers", [](const py::array_t<bool>& grid) {
    return cloud_to_array(voxel_centers(grid_from_array(grid)));
  });

  m.def(
      "downsample_mask",
      [](const py::array_t<bool>& grid, int r) {
        return grid_to_array(downsample_mask(grid_from_array(grid), r));
      },
      py::arg("grid"), py::arg("r") = 4);

  m.def("grid_iou", [](const py::array_t<bool>& a, const py::array_t<bool>& b) {
    return grid_iou(grid_from_array(a), grid_from_array(b));
  });

  m.def("save_voxg", [](const py::array_t<bool>& grid,
                        const std::string& path) {
    save_voxg(grid_from_array(grid), path);
  });
  m.def("load_voxg",
        [](const std::string& path) { return grid_to_array(load_voxg(path)); });

  m.def(
      "visible_points",
      [](const std::string& path, int view, int n_views, double tau_fraction,
         int image_size, int64_t count, uint64_t seed) {
        const auto geo = load_geometry(path);
        if (!geo.mesh) throw DataError("input has no triangles: " + path);
        auto mesh = *geo.mesh;
        normalize_unit_cube(mesh);
        ViewRingConfig rc;
        rc.n_views = n_views;
        rc.width = rc.height = image_size;
        const auto cams = make_view_ring(rc);
        if (view < 0 || view >= int(cams.size())) {
          throw UsageError("view index out of range");
        }
        Rng rng(seed);
        const auto cloud = sample_surface(mesh, count, rng);
        const auto depth = render_depth_mesh(mesh, cams[size_t(view)]);
        const double tau = compute_tau(depth, tau_fraction);
        const auto mask = observation_mask(cloud, cams[size_t(view)], depth,
                                           tau);
        return cloud_to_array(extract_visible(cloud, mask).cloud);
      },
      py::arg("path"), py::arg("view") = 0, py::arg("n_views") = 8,
      py::arg("tau_fraction") = 0.05, py::arg("image_size") = 64,
      py::arg("count") = 50000, py::arg("seed") = 0);

  m.def(
      "chamfer",
      [](const py::array_t<double>& p, const py::array_t<double>& q,
         const std::string& mode, bool squared) {
        const ChamferMode cm =
            mode == "sum" ? ChamferMode::kSum : ChamferMode::kMean;
        return chamfer(cloud_from_array(p), cloud_from_array(q), cm, squared);
      },
      py::arg("p"), py::arg("q"), py::arg("mode") = "mean",
      py::arg("squared") = false);

  m.def(
      "fscore",
      [](const py::array_t<double>& p, const py::array_t<double>& q,
         double threshold) {
        const auto s = fscore(cloud_from_array(p), cloud_from_array(q),
                              threshold);
        return py::make_tuple(s.f, s.precision, s.recall);
      },
      py::arg("p"), py::arg("q"), py::arg("threshold") = 0.05);

  m.def(
      "generate",
      [](const std::string& inpaint_path, const std::string& vae_path,
         const py::array_t<bool>& prior, const std::vector<double>& cond,
         int steps, int inpaint_steps, double threshold, uint64_t seed) {
        const auto vae = load_vae(vae_path);
        const auto net = load_inpaint(inpaint_path);
        const auto grid = grid_from_array(prior);
        if (grid.n() != vae.config.n) {
          throw DataError("prior resolution does not match the model");
        }
        num::NoGradGuard ng;
        const auto q_vis = encode_ss(grid, vae);
        const auto m_s = mask_to_tensor(downsample_mask(grid, vae.config.r));
        std::vector<double> c = cond;
        if (c.empty()) c = zero_condition(net.config);
        Schedule sched{steps, inpaint_steps};
        sched.validate();
        Rng rng = Rng::derive(seed, 0);
        return grid_to_array(generate_grid(net, vae, q_vis, m_s, c, sched,
                                           threshold, rng));
      },
      py::arg("inpaint_path"), py::arg("vae_path"), py::arg("prior"),
      py::arg("cond") = std::vector<double>{}, py::arg("steps") = 50,
      py::arg("inpaint_steps") = 25, py::arg("threshold") = 0.5,
      py::arg("seed") = 0);
}
