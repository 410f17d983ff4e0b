// tumorscope: batch segmentation/Brodmann mapping, review server, fixtures.

#include <tumorscope/atlas.hpp>
#include <tumorscope/nifti.hpp>
#include <tumorscope/phantom.hpp>
#include <tumorscope/pipeline.hpp>
#include <tumorscope/service.hpp>

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace tumorscope;

namespace {

std::pair<int, int> parse_selection(const std::string& text) {
  const auto colon = text.find(':');
  if (colon == std::string::npos) throw Error(Errc::BadIndex, "--select expects <slice>:<k>, got " + text);
  try {
    std::size_t used_a = 0, used_b = 0;
    const int slice = std::stoi(text.substr(0, colon), &used_a);
    const int k = std::stoi(text.substr(colon + 1), &used_b);
    if (used_a != colon || used_b != text.size() - colon - 1) throw std::invalid_argument(text);
    return {slice, k};
  } catch (const std::logic_error&) {
    throw Error(Errc::BadIndex, "--select expects <slice>:<k>, got " + text);
  }
}

void print_summary(const RunReport& report) {
  for (const SliceResult& s : report.slices) {
    std::printf("slice %3d  iterations %3d%s  selected %s", s.slice_index, s.iterations,
                s.converged ? "" : " (not converged)", s.selected ? std::to_string(*s.selected).c_str() : "-");
    if (s.report) {
      std::printf("  hits %zu", s.report->hits.size());
      for (const OverlapHit& h : s.report->hits) {
        std::printf("  [%s BA%d %zu px]", std::string(hemisphere_code(h.hemisphere)).c_str(), h.area_id,
                    h.overlap_pixels);
      }
    }
    std::printf("\n");
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fuzzy C-Means tumor segmentation and Brodmann-area mapping"};
  app.require_subcommand(1);

  PipelineConfig cfg;
  std::string input, atlas_path, out_dir;
  std::vector<std::string> selections;
  std::vector<int> slices;
  bool auto_select = false;
  auto* run = app.add_subcommand("run", "Segment slices and map the selected cluster onto the atlas");
  run->add_option("--input", input, "Normalized NIfTI-1 volume (.nii)")->required();
  run->add_option("--atlas", atlas_path, "Atlas manifest.json")->required();
  run->add_option("--out", out_dir, "Output directory")->required();
  run->add_option("--gap-mm", cfg.gap_mm, "Axial gap between sampled slices")->default_val(10.0);
  run->add_option("--clusters", cfg.fcm.c, "Cluster count c")->default_val(5);
  run->add_option("--m", cfg.fcm.m, "Fuzziness exponent")->default_val(2.0);
  run->add_option("--epsilon", cfg.fcm.epsilon, "Membership change threshold")->default_val(1e-5);
  run->add_option("--max-iter", cfg.fcm.max_iter, "Iteration cap")->default_val(100);
  run->add_option("--seed", cfg.fcm.seed, "Initialization seed")->default_val(0);
  run->add_option("--slices", slices, "Only these slice indices")->delimiter(',');
  auto* select_opt = run->add_option("--select", selections, "Cluster choice <slice>:<k> (repeatable)");
  run->add_flag("--auto-select", auto_select, "Pick the brightest compact cluster per slice")->excludes(select_opt);
  run->add_option("--min-overlap", cfg.min_overlap_pixels, "Pixels needed to report an area")->default_val(1);
  run->add_option("--workers", cfg.workers, "Slices processed concurrently")->default_val(1);

  std::string serve_atlas, host = "127.0.0.1", webui;
  int port = 8080;
  ServiceConfig service_cfg;
  long long ttl_seconds = 3600;
  std::size_t max_upload_mb = 256;
  auto* serve = app.add_subcommand("serve", "Run the interactive review service");
  serve->add_option("--atlas", serve_atlas, "Atlas manifest.json")->required();
  serve->add_option("--host", host)->default_val("127.0.0.1");
  serve->add_option("--port", port)->default_val(8080);
  serve->add_option("--gap-mm", service_cfg.gap_mm)->default_val(10.0);
  serve->add_option("--webui", webui, "Directory with the built browser UI");
  serve->add_option("--ttl", ttl_seconds, "Idle session lifetime in seconds")->default_val(3600);
  serve->add_option("--max-upload-mb", max_upload_mb)->default_val(256);

  std::string phantom_out, phantom_kind = "blob";
  auto* phantom_cmd = app.add_subcommand("phantom", "Write a synthetic volume and fixture atlas");
  phantom_cmd->add_option("--out", phantom_out, "Output directory")->required();
  phantom_cmd->add_option("--kind", phantom_kind, "blob (79x95x20 @ 10 mm) or extent (79x95x160 @ 1 mm)")
      ->check(CLI::IsMember({"blob", "extent"}));

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      cfg.input_nifti = input;
      cfg.atlas_manifest = atlas_path;
      cfg.output_dir = out_dir;
      if (!slices.empty()) cfg.slices = slices;
      if (auto_select) {
        cfg.selection = SelectionMode::Auto;
      } else if (!selections.empty()) {
        cfg.selection = SelectionMode::Explicit;
        for (const auto& s : selections) {
          const auto [slice, k] = parse_selection(s);
          cfg.explicit_selection[slice] = k;
        }
      }
      const RunReport report = run_pipeline(cfg);
      print_summary(report);
      std::printf("wrote %s\n", (fs::path(out_dir) / "report.json").string().c_str());
      return 0;
    }
    if (*serve) {
      service_cfg.webui_dir = webui;
      service_cfg.session_ttl = std::chrono::seconds(ttl_seconds);
      service_cfg.max_upload_bytes = max_upload_mb << 20;
      ReviewService service(load_atlas(serve_atlas), service_cfg);
      httplib::Server server;
      service.mount(server);
      std::printf("listening on http://%s:%d\n", host.c_str(), port);
      std::fflush(stdout);
      if (!server.listen(host, port)) throw Error(Errc::IoFailure, "cannot listen on " + host + ":" + std::to_string(port));
      return 0;
    }
    if (*phantom_cmd) {
      const fs::path dir(phantom_out);
      fs::create_directories(dir);
      const Volume v = phantom_kind == "blob" ? phantom::blob_volume() : phantom::extent_volume();
      write_file_bytes(dir / "phantom.nii", write_nifti(v));
      const fs::path manifest = save_atlas(phantom::fixture_atlas(), dir / "atlas");
      std::printf("wrote %s and %s\n", (dir / "phantom.nii").string().c_str(), manifest.string().c_str());
      return 0;
    }
  } catch (const Error& e) {
    std::fprintf(stderr, "tumorscope: %s\n", e.what());
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "tumorscope: %s\n", e.what());
    return 4;
  }
  return 0;
}
