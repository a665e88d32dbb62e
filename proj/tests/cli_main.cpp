// End-to-end checks of the command-line tool. argv[1] is the binary path;
// every subcommand is exercised through std::system against phantom cohorts.

#include <sys/wait.h>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "flairsyn/volume_io.hpp"

namespace fs = std::filesystem;
using flairsyn::data::load_volume;

namespace {

std::string g_cli;
fs::path g_tmp;
int g_failures = 0;

void check(bool cond, const std::string& what) {
  if (cond) {
    std::printf("ok - %s\n", what.c_str());
  } else {
    std::printf("FAIL - %s\n", what.c_str());
    ++g_failures;
  }
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

struct RunResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

RunResult run(const std::string& args) {
  const fs::path out_file = g_tmp / "stdout.txt";
  const fs::path err_file = g_tmp / "stderr.txt";
  const std::string cmd =
      "\"" + g_cli + "\" " + args + " >" + out_file.string() + " 2>" + err_file.string();
  const int rc = std::system(cmd.c_str());
  RunResult r;
  r.exit_code = WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
  r.out = slurp(out_file);
  r.err = slurp(err_file);
  return r;
}

bool contains(const std::string& hay, const std::string& needle) { return hay.find(needle) != std::string::npos; }

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> lines;
  std::istringstream ss(text);
  std::string line;
  while (std::getline(ss, line))
    if (!line.empty()) lines.push_back(line);
  return lines;
}

void test_help() {
  const auto r = run("--help");
  check(r.exit_code == 0, "--help exits 0");
  check(contains(r.out, "phantom") && contains(r.out, "predict"), "--help lists the subcommands");
}

void test_phantom() {
  const auto a = run("phantom --out " + (g_tmp / "cohort").string() + " --profile 2x2 --side 24 --seed 3");
  check(a.exit_code == 0, "phantom generation exits 0");
  check(contains(a.out, "wrote 4 study records (2 sample pairs)"), "phantom reports record and pair counts");
  check(fs::exists(g_tmp / "cohort/manifest.csv"), "phantom writes manifest.csv");
  check(fs::exists(g_tmp / "cohort/phantom_config.json"), "phantom writes its effective config");

  const auto b = run("phantom --out " + (g_tmp / "cohort_b").string() + " --profile 2x2 --side 24 --seed 3");
  check(b.exit_code == 0, "phantom regeneration exits 0");
  bool identical = true;
  for (const char* name : {"manifest.csv", "phantom_truth.json", "P01_tp1_FLAIR.nii.gz", "P02_tp2_T2.nii.gz"})
    identical = identical && slurp(g_tmp / "cohort" / name) == slurp(g_tmp / "cohort_b" / name) &&
                !slurp(g_tmp / "cohort" / name).empty();
  check(identical, "same-seed cohorts are byte-identical");

  {
    std::ofstream blocker(g_tmp / "blocker");
    blocker << "x";
  }
  const auto c = run("phantom --out " + (g_tmp / "blocker/sub").string());
  check(c.exit_code != 0 && contains(c.err, (g_tmp / "blocker/sub").string()),
        "unwritable output directory fails and names the path");

  const auto d = run("phantom --out " + (g_tmp / "bad").string() + " --profile 3y4");
  check(d.exit_code == 1 && contains(d.err, "--profile"), "malformed profile spec is rejected");
}

void test_train() {
  const std::string manifest = (g_tmp / "cohort/manifest.csv").string();
  const auto r = run("train --manifest " + manifest + " --arch acgan --max-steps 1 --epochs-const 1" +
                     " --epochs-decay 0 --out " + (g_tmp / "run_acgan").string() + " --seed 4");
  check(r.exit_code == 0, "acgan training run exits 0");
  check(contains(r.out, "initial val_l1"), "training reports validation L1");
  check(fs::exists(g_tmp / "run_acgan/effective_config.json"), "training writes the effective config");
  check(fs::exists(g_tmp / "run_acgan/acgan_log.jsonl"), "training writes the epoch log");
  check(fs::exists(g_tmp / "run_acgan/acgan_best.g.ckpt") && fs::exists(g_tmp / "run_acgan/acgan_final.g.ckpt"),
        "training writes generator checkpoints");
  check(fs::exists(g_tmp / "run_acgan/acgan_final.d.ckpt"), "adversarial training writes the discriminator");

  const auto u = run("train --manifest " + manifest + " --arch unet --max-steps 1 --epochs-const 1" +
                     " --epochs-decay 0 --out " + (g_tmp / "run_unet").string() + " --seed 4");
  check(u.exit_code == 0, "unet training run exits 0");
  check(fs::exists(g_tmp / "run_unet/unet_final.g.ckpt") && !fs::exists(g_tmp / "run_unet/unet_final.d.ckpt"),
        "unet training writes no discriminator checkpoint");

  const auto bad = run("train --manifest " + manifest + " --arch vae --out " + (g_tmp / "run_bad").string());
  check(bad.exit_code == 1 && contains(bad.err, "unet, gt_gan, dt_gan, acgan"),
        "unknown arch fails and lists the valid ones");
}

void test_predict() {
  const std::string ckpt = (g_tmp / "run_acgan/acgan_best").string();
  const std::string sources = " --mprage " + (g_tmp / "cohort/P01_tp1_MPRAGE.nii.gz").string() +  //
                              " --t2 " + (g_tmp / "cohort/P01_tp1_T2.nii.gz").string() +          //
                              " --pd " + (g_tmp / "cohort/P01_tp1_PD.nii.gz").string() +          //
                              " --flair " + (g_tmp / "cohort/P01_tp1_FLAIR.nii.gz").string();

  const auto r1 = run("predict --checkpoint " + ckpt + sources + " --days 365 --out-volume " +
                      (g_tmp / "pred1.nii.gz").string() + " --preview " + (g_tmp / "preview.pgm").string());
  check(r1.exit_code == 0, "prediction at one year exits 0");
  const auto r3 = run("predict --checkpoint " + ckpt + sources + " --days 1095 --out-volume " +
                      (g_tmp / "pred3.nii.gz").string());
  check(r3.exit_code == 0, "prediction at three years exits 0");

  if (fs::exists(g_tmp / "pred1.nii.gz") && fs::exists(g_tmp / "pred3.nii.gz")) {
    const auto p1 = load_volume((g_tmp / "pred1.nii.gz").string());
    const auto p3 = load_volume((g_tmp / "pred3.nii.gz").string());
    check(p1.shape == std::array<int64_t, 3>{24, 24, 24}, "prediction has the checkpoint's full shape");
    double l1 = 0.0;
    for (size_t i = 0; i < p1.voxels.size(); ++i) l1 += std::abs(p1.voxels[i] - p3.voxels[i]);
    check(l1 > 0.0, "different day counts produce different volumes");
  } else {
    check(false, "predicted volumes were written");
  }
  check(slurp(g_tmp / "preview.pgm").rfind("P5", 0) == 0, "preview is a PGM image");

  const auto bad = run("predict --checkpoint " + ckpt + sources + " --days 0 --out-volume " +
                       (g_tmp / "pred0.nii.gz").string());
  check(bad.exit_code == 1 && contains(bad.err, "positive day count"), "day count 0 is rejected");
}

void test_evaluate() {
  const std::string cohort = (g_tmp / "cohort").string();
  const auto r = run("evaluate --pred " + cohort + " --ref " + cohort + " --csv " + (g_tmp / "m.csv").string());
  check(r.exit_code == 0, "self-evaluation exits 0");
  const auto rows = lines_of(slurp(g_tmp / "m.csv"));
  check(rows.size() == 1 + 16, "metric CSV has one row per volume");
  check(rows[0] == "volume_id,psnr_db,nmse,ssim", "metric CSV header");
  bool perfect = rows.size() > 1;
  for (size_t i = 1; i < rows.size(); ++i)
    perfect = perfect && rows[i].size() > 10 && rows[i].substr(rows[i].find(',')) == ",inf,0,1";
  check(perfect, "identical volumes score psnr=inf nmse=0 ssim=1");

  run("phantom --out " + (g_tmp / "cohort_small").string() + " --profile 1x2 --side 24 --seed 3");
  const auto bad = run("evaluate --pred " + cohort + " --ref " + (g_tmp / "cohort_small").string() +
                       " --csv " + (g_tmp / "m2.csv").string());
  check(bad.exit_code != 0 && contains(bad.err, "(missing in"), "mismatched volume sets name the missing ids");
}

void test_crossval() {
  {
    std::ofstream cfg(g_tmp / "cv.json");
    cfg << R"({"data": {"folds": 2}})" << "\n";
  }
  const std::string base = "crossval --config " + (g_tmp / "cv.json").string() + " --manifest " +
                           (g_tmp / "cohort/manifest.csv").string() +
                           " --arch unet --max-steps 1 --epochs-const 1 --epochs-decay 0 --seed 6";
  const auto r = run(base + " --out " + (g_tmp / "cv_out").string());
  check(r.exit_code == 0, "crossval exits 0");
  check(contains(r.out, "pooled"), "crossval prints the pooled row");
  const auto rows = lines_of(slurp(g_tmp / "cv_out/crossval_report.csv"));
  check(rows.size() == 1 + 2 + 1, "crossval report has fold rows plus a pooled row");
  check(!rows.empty() && rows.back().rfind("pooled,", 0) == 0, "pooled row closes the report");
  check(fs::exists(g_tmp / "cv_out/crossval_report.json") && fs::exists(g_tmp / "cv_out/crossval_samples.csv"),
        "crossval writes the JSON report and per-sample CSV");

  const auto r2 = run(base + " --out " + (g_tmp / "cv_out2").string());
  check(r2.exit_code == 0, "crossval rerun exits 0");
  check(slurp(g_tmp / "cv_out/crossval_report.csv") == slurp(g_tmp / "cv_out2/crossval_report.csv"),
        "same-seed crossval reports are byte-identical");
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::fprintf(stderr, "usage: cli_tests <path-to-flairsyn-binary>\n");
    return 2;
  }
  g_cli = argv[1];
  g_tmp = fs::absolute("cli_tmp");
  std::error_code ec;
  fs::remove_all(g_tmp, ec);
  fs::create_directories(g_tmp);

  test_help();
  test_phantom();
  test_train();
  test_predict();
  test_evaluate();
  test_crossval();

  if (g_failures > 0) {
    std::printf("%d check(s) failed\n", g_failures);
    return 1;
  }
  std::printf("all cli checks passed\n");
  return 0;
}
