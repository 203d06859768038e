#include <CLI11.hpp>
#include <Eigen/Core>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "lrfit/analysis.hpp"
#include "lrfit/fitting.hpp"
#include "lrfit/io.hpp"

namespace fs = std::filesystem;
using namespace lrfit;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitRuntime = 3;

struct Manifest {
  std::string input, config;
  std::vector<std::string> outputs;
  std::vector<std::pair<std::string, double>> timingsMs;
  std::vector<std::string> notes;

  void write(const fs::path& path) const {
    std::ofstream f(path);
    f << "input " << input << "\n";
    f << "config " << config << "\n";
    for (const auto& o : outputs) f << "output " << o << "\n";
    for (const auto& [name, ms] : timingsMs) f << "timing_ms " << name << " " << ms << "\n";
    for (const auto& n : notes) f << "note " << n << "\n";
  }
};

class Timer {
 public:
  explicit Timer(Manifest& m, std::string name)
      : m_(m), name_(std::move(name)), t0_(std::chrono::steady_clock::now()) {}
  ~Timer() {
    auto dt = std::chrono::steady_clock::now() - t0_;
    m_.timingsMs.emplace_back(name_,
                              std::chrono::duration<double, std::milli>(dt).count());
  }

 private:
  Manifest& m_;
  std::string name_;
  std::chrono::steady_clock::time_point t0_;
};

void requireFile(const std::string& path) {
  if (!fs::exists(path))
    throw std::invalid_argument("input file does not exist: " + path);
}

std::vector<double> parseLevels(const std::string& spec) {
  std::vector<double> out;
  if (spec.find(':') != std::string::npos) {
    double a, b, step;
    char c1, c2;
    std::istringstream ss(spec);
    if (!(ss >> a >> c1 >> b >> c2 >> step) || c1 != ':' || c2 != ':' || !(step > 0))
      throw std::invalid_argument("levels must be a:b:step with step > 0");
    for (double v = a; v <= b + 1e-12 * std::abs(step); v += step) out.push_back(v);
  } else {
    std::stringstream ss(spec);
    std::string item;
    while (std::getline(ss, item, ','))
      if (!item.empty()) out.push_back(std::stod(item));
  }
  if (out.empty()) throw std::invalid_argument("empty level list");
  return out;
}

PointCloud loadCloud(const std::string& input, const std::string& significant,
                     double tolSig) {
  requireFile(input);
  PointCloud cloud = readXYZ(input);
  if (!significant.empty()) {
    requireFile(significant);
    PointCloud sig = readXYZ(significant);
    for (auto& p : sig.pts) {
      p.significant = true;
      p.tol = tolSig;
      cloud.pts.push_back(p);
    }
  }
  return cloud;
}

void markOccupancy(LRSurface& s, const PointCloud& cloud) {
  s.clearOccupancy();
  Rect d = s.domain();
  for (const auto& p : cloud.pts)
    if (p.x >= d.umin && p.x <= d.umax && p.y >= d.vmin && p.y <= d.vmax)
      s.markOccupied(s.elementAt(p.x, p.y), true);
}

int cmdFit(const std::string& input, const std::string& preset,
           const std::string& config, const std::string& outDir,
           const std::string& significant, double tolSig) {
  if (preset.empty() == config.empty())
    throw std::invalid_argument("exactly one of --preset and --config is required");
  FitConfig cfg;
  std::string cfgName;
  if (!preset.empty()) {
    cfg = FitConfig::preset(preset);
    cfgName = preset;
  } else {
    requireFile(config);
    cfg = FitConfig::fromFile(config);
    cfgName = config;
  }
  if (!significant.empty()) cfg.significantTol = tolSig;

  Manifest manifest;
  manifest.input = input;
  manifest.config = cfgName;

  PointCloud cloud = loadCloud(input, significant, tolSig);
  if (cloud.empty()) throw std::runtime_error("point cloud is empty");
  std::cout << "read " << cloud.size() << " points\n";

  AdaptiveFitResult res;
  {
    Timer t(manifest, "fit");
    res = adaptiveFit(cloud, cfg);
  }
  fs::create_directories(outDir);
  auto out = [&](const std::string& name) {
    std::string p = (fs::path(outDir) / name).string();
    manifest.outputs.push_back(p);
    return p;
  };

  writeLRSurf(res.surface, out("surface.lrsurf"));

  long long t = std::max(1LL, res.accuracy.total);
  {
    std::ofstream f(out("report.txt"));
    f << "name coefficients max_dist avg_dist pct_lt_0.2 pct_0.2_0.5 pct_ge_0.5 "
         "out_of_tol iterations\n";
    f << cfgName << " " << res.surface.numBSplines() << " " << res.accuracy.maxDist
      << " " << res.accuracy.avgDist << " " << 100.0 * res.accuracy.band0 / t << " "
      << 100.0 * res.accuracy.band1 / t << " " << 100.0 * res.accuracy.band2 / t << " "
      << res.accuracy.outOfTol << " " << res.history.size() - 1 << "\n";
  }
  {
    std::ofstream f(out("history.csv"));
    f << "iteration,coefficients,max_dist,avg_dist,out_of_tol,band_lt_0.2,"
         "band_0.2_0.5,band_ge_0.5\n";
    for (const auto& h : res.history)
      f << h.iteration << "," << h.numCoefs << "," << h.maxDist << "," << h.avgDist
        << "," << h.outOfTol << "," << h.band0 << "," << h.band1 << "," << h.band2
        << "\n";
  }
  for (const auto& h : res.history) {
    std::ostringstream os;
    os << "iteration " << h.iteration << " coefficients " << h.numCoefs << " max "
       << h.maxDist << " avg " << h.avgDist << " out_of_tol " << h.outOfTol;
    manifest.notes.push_back(os.str());
  }

  if (cfg.weightedMid) {
    Timer t2(manifest, "weighted_mid");
    auto [upper, lower] = limitSurfaces(res.surface, cloud);
    writeLRSurf(upper, out("upper.lrsurf"));
    writeLRSurf(lower, out("lower.lrsurf"));
    writeLRSurf(weightedMidSurface(res.surface, upper, cfg.midD1, cfg.midD2),
                out("mid.lrsurf"));
  }

  manifest.write(fs::path(outDir) / "manifest.txt");
  std::cout << "fit complete: " << res.surface.numBSplines() << " coefficients, max "
            << res.accuracy.maxDist << " avg " << res.accuracy.avgDist
            << " out-of-tol " << res.accuracy.outOfTol << "\n";
  return 0;
}

int cmdExportRaster(const std::string& surface, double cellsize, bool mask,
                    const std::string& input, const std::string& outPath) {
  requireFile(surface);
  if (!(cellsize > 0)) throw std::invalid_argument("cellsize must be positive");
  LRSurface s = readLRSurf(surface);
  if (mask) {
    if (input.empty())
      throw std::invalid_argument("--mask needs --input to derive the occupancy mask");
    markOccupancy(s, loadCloud(input, "", 0));
  }
  writeASC(rasterFromSurface(s, cellsize, mask), outPath);
  std::cout << "wrote " << outPath << "\n";
  return 0;
}

int cmdExportSplitTP(const std::string& surface, int maxSegmented,
                     const std::string& outDir) {
  requireFile(surface);
  if (maxSegmented < 0) throw std::invalid_argument("--max-segmented must be >= 0");
  LRSurface s = readLRSurf(surface);
  TPPatchSet set = splitToTP(s, maxSegmented);
  fs::create_directories(outDir);
  for (size_t i = 0; i < set.patches.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "patch_%03zu.lrsurf", i);
    writeLRSurf(LRSurface::fromTensorProduct(set.patches[i].surf),
                (fs::path(outDir) / name).string());
  }
  std::ofstream adj(fs::path(outDir) / "adjacency.txt");
  for (const auto& [a, b] : set.adjacency) adj << a << " " << b << "\n";
  for (const auto& w : set.warnings) std::cerr << "warning: " << w << "\n";
  std::cout << "wrote " << set.patches.size() << " patches to " << outDir << "\n";
  return 0;
}

int main2(int argc, char** argv);

}  // namespace

int main(int argc, char** argv) {
  try {
    return main2(argc, argv);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

namespace {

int main2(int argc, char** argv) {
  CLI::App app{"LR B-spline terrain surface toolkit"};
  app.require_subcommand(1);

  int threads = 0;
  if (const char* env = std::getenv("LRFIT_THREADS")) threads = std::atoi(env);
  app.add_option("--threads", threads, "worker thread cap (0 = library default)");

  // fit
  auto* fit = app.add_subcommand("fit", "fit an LR B-spline surface to a point cloud");
  std::string fitInput, fitPreset, fitConfig, fitOut, fitSig;
  double tolSig = 0.2;
  fit->add_option("--input", fitInput, "input XYZ point cloud")->required();
  fit->add_option("--preset", fitPreset, "configuration preset")
      ->check(CLI::IsMember({"F7", "V7", "V9", "V9E1", "V9E2", "WM7", "FS7", "FS9"}));
  fit->add_option("--config", fitConfig, "configuration file (key=value)");
  fit->add_option("--out", fitOut, "output directory")->required();
  fit->add_option("--significant", fitSig, "XYZ file of significant points");
  fit->add_option("--tol-sig", tolSig, "tolerance for significant points (m)");

  // export
  auto* exp = app.add_subcommand("export", "export a fitted surface");
  exp->require_subcommand(1);
  auto* expRaster = exp->add_subcommand("raster", "sample to an ESRI ASCII grid");
  std::string expSurface, expOut, expInput;
  double cellsize = 1.0;
  bool expMask = false;
  expRaster->add_option("--surface", expSurface, "lrsurf file")->required();
  expRaster->add_option("--cellsize", cellsize, "cell size (m)")->required();
  expRaster->add_flag("--mask", expMask, "nodata outside the occupancy mask");
  expRaster->add_option("--input", expInput, "XYZ cloud for the occupancy mask");
  expRaster->add_option("--out", expOut, "output .asc path")->required();
  auto* expSplit = exp->add_subcommand("split-tp", "split into tensor product patches");
  std::string splitSurface, splitOut;
  int maxSegmented = 0;
  expSplit->add_option("--surface", splitSurface, "lrsurf file")->required();
  expSplit->add_option("--max-segmented", maxSegmented,
                       "allowed partial knot lines per patch");
  expSplit->add_option("--out", splitOut, "output directory")->required();

  // analyze
  auto* ana = app.add_subcommand("analyze", "interrogate a fitted surface");
  ana->require_subcommand(1);
  std::string anaSurface, anaInput, anaOut, levelsSpec;
  double tolerance = 1e-6, resolution = 1.0, prominence = 0.0;
  double d1 = -20.0, d2 = 0.0;
  bool anaMask = false;

  auto* cnt = ana->add_subcommand("contour", "contour curves");
  cnt->add_option("--surface", anaSurface, "lrsurf file")->required();
  cnt->add_option("--levels", levelsSpec, "a:b:step or comma list")->required();
  cnt->add_option("--tolerance", tolerance, "trace tolerance (m)");
  cnt->add_flag("--mask", anaMask, "clip to the occupancy mask");
  cnt->add_option("--input", anaInput, "XYZ cloud for the occupancy mask");
  cnt->add_option("--out", anaOut, "output CSV")->required();

  auto* ext = ana->add_subcommand("extrema", "extremal points");
  ext->add_option("--surface", anaSurface, "lrsurf file")->required();
  ext->add_option("--levels", levelsSpec, "contour levels a:b:step or list")->required();
  ext->add_option("--tolerance", tolerance, "trace tolerance (m)");
  ext->add_option("--prominence", prominence, "minimum |z - trigger level|");
  ext->add_option("--input", anaInput, "XYZ cloud for the occupancy mask");
  ext->add_option("--out", anaOut, "output CSV")->required();

  auto* slp = ana->add_subcommand("slope", "slope raster (degrees)");
  slp->add_option("--surface", anaSurface, "lrsurf file")->required();
  slp->add_option("--resolution", resolution, "cell size (m)");
  slp->add_flag("--mask", anaMask, "nodata outside the occupancy mask");
  slp->add_option("--input", anaInput, "XYZ cloud for the occupancy mask");
  slp->add_option("--out", anaOut, "output .asc path")->required();

  auto* lim = ana->add_subcommand("limits", "lower/upper limit surfaces");
  lim->add_option("--surface", anaSurface, "lrsurf file")->required();
  lim->add_option("--input", anaInput, "XYZ point cloud")->required();
  lim->add_option("--out", anaOut, "output directory")->required();

  auto* mid = ana->add_subcommand("mid", "weighted mid-surface");
  mid->add_option("--surface", anaSurface, "lrsurf file")->required();
  mid->add_option("--input", anaInput, "XYZ point cloud")->required();
  mid->add_option("--d1", d1, "full-weight depth bound");
  mid->add_option("--d2", d2, "zero-weight depth bound");
  mid->add_option("--out", anaOut, "output .lrsurf path")->required();

  // accuracy
  auto* acc = app.add_subcommand("accuracy", "distance statistics surface vs cloud");
  std::string accSurface, accInput;
  double accThreshold = 0.5;
  acc->add_option("--surface", accSurface, "lrsurf or asc file")->required();
  acc->add_option("--input", accInput, "XYZ point cloud")->required();
  acc->add_option("--threshold", accThreshold, "tolerance for the out-of-tol count");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }
  if (threads > 0) Eigen::setNbThreads(threads);

  if (*fit) return cmdFit(fitInput, fitPreset, fitConfig, fitOut, fitSig, tolSig);
  if (*expRaster) return cmdExportRaster(expSurface, cellsize, expMask, expInput, expOut);
  if (*expSplit) return cmdExportSplitTP(splitSurface, maxSegmented, splitOut);

  if (*cnt || *ext || *slp || *lim || *mid) {
    requireFile(anaSurface);
    LRSurface s = readLRSurf(anaSurface);
    if (*cnt || *ext || *slp) {
      if (!anaInput.empty()) markOccupancy(s, loadCloud(anaInput, "", 0));
      if (*cnt) {
        ContourSet c = contour(s, parseLevels(levelsSpec), tolerance, anaMask);
        for (const auto& w : c.warnings) std::cerr << "warning: " << w << "\n";
        writeContourCSV(c, anaOut);
        std::cout << "wrote " << c.branches.size() << " branches to " << anaOut << "\n";
      } else if (*ext) {
        ContourSet c = contour(s, parseLevels(levelsSpec), tolerance);
        auto pts = extremalPoints(s, c, prominence);
        writeExtremaCSV(pts, anaOut);
        std::cout << "wrote " << pts.size() << " extremal points to " << anaOut << "\n";
      } else {
        writeASC(slopeRaster(s, resolution, anaMask), anaOut);
        std::cout << "wrote " << anaOut << "\n";
      }
      return 0;
    }
    PointCloud cloud = loadCloud(anaInput, "", 0);
    auto [upper, lower] = limitSurfaces(s, cloud);
    if (*lim) {
      fs::create_directories(anaOut);
      writeLRSurf(upper, (fs::path(anaOut) / "upper.lrsurf").string());
      writeLRSurf(lower, (fs::path(anaOut) / "lower.lrsurf").string());
      std::cout << "wrote limit surfaces to " << anaOut << "\n";
    } else {
      writeLRSurf(weightedMidSurface(s, upper, d1, d2), anaOut);
      std::cout << "wrote " << anaOut << "\n";
    }
    return 0;
  }

  if (*acc) {
    requireFile(accSurface);
    PointCloud cloud = loadCloud(accInput, "", 0);
    if (cloud.empty()) throw std::invalid_argument("point cloud is empty");
    bool isASC = accSurface.size() > 4 &&
                 accSurface.substr(accSurface.size() - 4) == ".asc";
    double maxDist = 0, sum = 0, sq = 0;
    long long total = 0, outside = 0, b0 = 0, b1 = 0, b2 = 0, outTol = 0;
    if (isASC) {
      Raster r = readASC(accSurface);
      for (const auto& p : cloud.pts) {
        double z;
        try {
          z = rasterBilinearEval(r, p.x, p.y);
        } catch (const std::domain_error&) {
          ++outside;
          continue;
        }
        if (z == r.nodata) {
          ++outside;
          continue;
        }
        double a = std::abs(p.z - z);
        ++total;
        sum += a;
        sq += a * a;
        maxDist = std::max(maxDist, a);
        (a < 0.2 ? b0 : a < 0.5 ? b1 : b2)++;
        if (a > accThreshold) ++outTol;
      }
    } else {
      LRSurface s = readLRSurf(accSurface);
      FitConfig cfg;
      cfg.threshold = ThresholdSpec::constant(accThreshold);
      auto res = computeAccuracy(s, cloud, cfg);
      maxDist = res.report.maxDist;
      sum = res.report.avgDist * res.report.total;
      total = res.report.total;
      outside = res.report.outsideDomain;
      b0 = res.report.band0;
      b1 = res.report.band1;
      b2 = res.report.band2;
      outTol = res.report.outOfTol;
      for (double r : res.residuals)
        if (std::isfinite(r)) sq += r * r;
    }
    if (outside > 0)
      std::cerr << "warning: " << outside << " points outside the surface extent\n";
    if (total == 0) throw std::runtime_error("no points covered by the surface");
    std::cout << "points " << total << "\nmax_dist " << maxDist << "\navg_dist "
              << sum / total << "\nrmse " << std::sqrt(sq / total) << "\nband_lt_0.2 "
              << b0 << "\nband_0.2_0.5 " << b1 << "\nband_ge_0.5 " << b2
              << "\nout_of_tol " << outTol << "\noutside " << outside << "\n";
    return 0;
  }
  return kExitUsage;
}

}  // namespace
