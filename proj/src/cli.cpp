#include "regmod/cli.hpp"

#include "regmod/config_io.hpp"
#include "regmod/engine.hpp"
#include "regmod/io.hpp"
#include "regmod/metrics.hpp"
#include "regmod/regularity.hpp"
#include "regmod/synth.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <filesystem>
#include <iostream>
#include <map>
#include <sstream>

namespace regmod {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

json input_entry(const std::string& path) {
    json e;
    e["path"] = path;
    e["fnv1a64"] = file_hash(path);
    return e;
}

json manifest_base(const std::string& command) {
    json m;
    m["tool"] = "regmod";
    m["version"] = kToolVersion;
    m["command"] = command;
    return m;
}

void write_json(const std::string& path, const json& j) {
    write_file_atomic(path, j.dump(2) + "\n");
}

std::array<int, 3> parse_dims(const std::string& s, int ndim) {
    std::array<int, 3> dims{1, 1, 1};
    std::stringstream ss(s);
    std::string cell;
    std::vector<int> vals;
    while (std::getline(ss, cell, ',')) vals.push_back(std::stoi(cell));
    if (vals.size() == 1) {
        for (int a = 0; a < ndim; ++a) dims[std::size_t(a)] = vals[0];
    } else if (int(vals.size()) == ndim) {
        for (int a = 0; a < ndim; ++a) dims[std::size_t(a)] = vals[std::size_t(a)];
    } else {
        throw CLI::ValidationError("--dims", "expected one extent or one per axis");
    }
    return dims;
}

// --- register -----------------------------------------------------------

struct RegisterArgs {
    std::string fixed, moving, config, preset = "DWCPI", direction = "fwd", out;
};

int do_register(const RegisterArgs& a) {
    auto t0 = std::chrono::steady_clock::now();
    RegConfig cfg = preset_config(a.preset);
    if (!a.config.empty()) cfg = load_config(a.config, cfg);
    cfg.bidirectional = (a.direction == "both");
    cfg.validate();

    ScalarVolume fixed = read_scalar(a.fixed);
    ScalarVolume moving = read_scalar(a.moving);
    fs::create_directories(a.out);
    auto path = [&](const char* name) { return (fs::path(a.out) / name).string(); };

    json dirs;
    std::vector<std::string> products;
    if (a.direction == "bwd") {
        RegResult r = register_pair(moving, fixed, cfg);
        write_field(path("disp_bwd.nii"), r.forward.full);
        write_scalar(path("warped_bwd.nii"), warp(fixed, r.forward.full));
        products = {"disp_bwd.nii", "warped_bwd.nii"};
        dirs["backward"] = direction_json(r.forward);
    } else {
        RegResult r = register_pair(fixed, moving, cfg);
        write_field(path("disp_fwd.nii"), r.forward.full);
        write_scalar(path("warped_fwd.nii"), warp(moving, r.forward.full));
        products = {"disp_fwd.nii", "warped_fwd.nii"};
        dirs["forward"] = direction_json(r.forward);
        if (r.backward) {
            write_field(path("disp_bwd.nii"), r.backward->full);
            write_scalar(path("warped_bwd.nii"), warp(fixed, r.backward->full));
            products.push_back("disp_bwd.nii");
            products.push_back("warped_bwd.nii");
            dirs["backward"] = direction_json(*r.backward);
        }
    }

    json diag;
    diag["config"] = config_to_json(cfg);
    diag["directions"] = dirs;
    write_json(path("diagnostics.json"), diag);
    products.push_back("diagnostics.json");

    json m = manifest_base("register");
    m["config"] = config_to_json(cfg);
    m["preset"] = a.preset;
    m["direction"] = a.direction;
    m["inputs"] = {{"fixed", input_entry(a.fixed)}, {"moving", input_entry(a.moving)}};
    products.push_back("manifest.json");
    m["products"] = products;
    auto dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0);
    m["timing_seconds"] = dt.count();
    write_json(path("manifest.json"), m);

    for (auto it = dirs.begin(); it != dirs.end(); ++it)
        std::cout << "regmod register " << it.key() << ": loss "
                  << it.value()["initial_loss"].get<double>() << " -> "
                  << it.value()["final_loss"].get<double>() << "\n";
    return 0;
}

// --- evaluate / jacobian ------------------------------------------------

struct EvaluateArgs {
    std::string disp, fixed_seg, moving_seg, labels, fixed_lms, moving_lms, mask, report;
    std::string ndv_unit = "percent";
    double tau = 1.0;
};

int do_evaluate(const EvaluateArgs& a) {
    DisplacementField u = read_field(a.disp);
    json rep;
    json inputs;
    inputs["disp"] = input_entry(a.disp);

    JacobianField jf = jacobian_det(u);
    LabelVolume mask_vol;
    const LabelVolume* mask = nullptr;
    if (!a.mask.empty()) {
        mask_vol = read_labels(a.mask);
        mask = &mask_vol;
        inputs["mask"] = input_entry(a.mask);
    }
    rep["mask"] = a.mask.empty() ? "none" : a.mask;
    rep["sd_log_j_x100"] = round_sig6(sd_log_j(jf, mask) * 100.0);
    double f = ndv(jf, mask);
    rep["ndv_unit"] = a.ndv_unit;
    rep["ndv"] = round_sig6(a.ndv_unit == "per_10k" ? f * 1e4 : f * 100.0);

    if (!a.fixed_seg.empty() || !a.moving_seg.empty()) {
        if (a.fixed_seg.empty() || a.moving_seg.empty())
            throw std::invalid_argument("--fixed-seg and --moving-seg must be given together");
        LabelVolume fseg = read_labels(a.fixed_seg);
        LabelVolume mseg = read_labels(a.moving_seg);
        inputs["fixed_seg"] = input_entry(a.fixed_seg);
        inputs["moving_seg"] = input_entry(a.moving_seg);
        std::vector<std::int32_t> labels;
        if (!a.labels.empty()) {
            std::stringstream ss(a.labels);
            std::string cell;
            while (std::getline(ss, cell, ',')) labels.push_back(std::stoi(cell));
        } else {
            labels = fseg.present_labels();
        }
        LabelVolume warped = warp_labels(mseg, u);
        auto dsc = dice(fseg, warped, labels);
        json per_label;
        double dsc_sum = 0.0;
        int dsc_n = 0;
        for (std::int32_t l : labels) {
            json lj;
            auto d = dsc.at(l);
            lj["dsc"] = d ? json(round_sig6(*d)) : json(nullptr);
            if (d) {
                dsc_sum += *d;
                ++dsc_n;
            }
            auto sd = surface_distances(fseg, warped, l);
            lj["hd95"] = sd ? json(round_sig6(sd->hd95)) : json(nullptr);
            lj["assd"] = sd ? json(round_sig6(sd->assd)) : json(nullptr);
            auto ns = nsd(fseg, warped, l, a.tau);
            lj["nsd"] = ns ? json(round_sig6(*ns)) : json(nullptr);
            per_label[std::to_string(l)] = lj;
        }
        rep["labels"] = per_label;
        rep["dsc_mean"] = dsc_n ? json(round_sig6(dsc_sum / dsc_n)) : json(nullptr);
        rep["nsd_tau_mm"] = round_sig6(a.tau);
    }

    if (!a.fixed_lms.empty() || !a.moving_lms.empty()) {
        if (a.fixed_lms.empty() || a.moving_lms.empty())
            throw std::invalid_argument("--fixed-lms and --moving-lms must be given together");
        LandmarkSet fl = read_landmarks(a.fixed_lms);
        LandmarkSet ml = read_landmarks(a.moving_lms);
        inputs["fixed_lms"] = input_entry(a.fixed_lms);
        inputs["moving_lms"] = input_entry(a.moving_lms);
        TreStats t = tre(u, fl, ml, u.grid.spacing);
        json tj;
        tj["mean_mm"] = round_sig6(t.mean);
        tj["std_mm"] = round_sig6(t.stddev);
        tj["median_mm"] = round_sig6(t.median);
        tj["p75_mm"] = round_sig6(t.p75);
        tj["count"] = t.per_landmark.size();
        rep["tre"] = tj;
    }

    rep["inputs"] = inputs;
    rep["tool"] = "regmod";
    rep["version"] = kToolVersion;
    write_json(a.report, rep);
    std::cout << "regmod evaluate: report written to " << a.report << "\n";
    return 0;
}

struct JacobianArgs {
    std::string disp, out, summary;
};

int do_jacobian(const JacobianArgs& a) {
    DisplacementField u = read_field(a.disp);
    JacobianField jf = jacobian_det(u);
    ScalarVolume det(jf.grid);
    det.data = jf.data;
    if (!a.out.empty()) write_scalar(a.out, det);
    if (!a.summary.empty()) {
        json s;
        s["sd_log_j_x100"] = round_sig6(sd_log_j(jf) * 100.0);
        s["ndv_percent"] = round_sig6(ndv(jf) * 100.0);
        s["ndv_per_10k"] = round_sig6(ndv(jf) * 1e4);
        double mn = jf.data[0], mx = jf.data[0], sum = 0.0;
        for (double v : jf.data) {
            mn = std::min(mn, v);
            mx = std::max(mx, v);
            sum += v;
        }
        s["det_min"] = round_sig6(mn);
        s["det_max"] = round_sig6(mx);
        s["det_mean"] = round_sig6(sum / double(jf.data.size()));
        s["inputs"] = {{"disp", input_entry(a.disp)}};
        write_json(a.summary, s);
    }
    std::cout << "regmod jacobian: ndv " << round_sig6(ndv(jf) * 100.0) << " %\n";
    return 0;
}

// --- synth --------------------------------------------------------------

struct SynthArgs {
    std::string kind, dims = "64", field = "gaussian-bumps", out;
    int ndim = 3, blobs = 5;
    double max_disp = 0.0;
    std::uint64_t seed = 2023;
    bool invert_moving = false;
};

int do_synth(const SynthArgs& a) {
    PhantomKind pk;
    if (a.kind == "blobs")
        pk = PhantomKind::Blobs;
    else if (a.kind == "grid")
        pk = PhantomKind::Grid;
    else if (a.kind == "two-tissue")
        pk = PhantomKind::TwoTissue;
    else
        throw std::invalid_argument("--kind must be blobs, grid or two-tissue");
    FieldKind fk;
    if (a.field == "affine")
        fk = FieldKind::Affine;
    else if (a.field == "gaussian-bumps")
        fk = FieldKind::GaussianBumps;
    else
        throw std::invalid_argument("--field must be affine or gaussian-bumps");

    std::array<int, 3> dims = parse_dims(a.dims, a.ndim);
    Phantom ph = make_phantom(pk, dims, a.ndim, a.seed, a.blobs);
    GeneratorField gf = make_field(fk, ph.image.grid, a.max_disp, a.seed + 1);
    GroundTruthPair pair = apply_ground_truth(ph, gf);
    if (a.invert_moving) pair.moving = invert_intensity(pair.moving);

    fs::create_directories(a.out);
    auto path = [&](const char* name) { return (fs::path(a.out) / name).string(); };
    write_scalar(path("fixed.nii"), pair.fixed);
    write_scalar(path("moving.nii"), pair.moving);
    write_labels(path("fixed_seg.nii"), pair.fixed_labels);
    write_labels(path("moving_seg.nii"), pair.moving_labels);
    write_landmarks(path("fixed_lms.csv"), pair.fixed_lms, a.ndim);
    write_landmarks(path("moving_lms.csv"), pair.moving_lms, a.ndim);
    write_field(path("u_true.nii"), gf.u_true);

    json m = manifest_base("synth");
    m["kind"] = a.kind;
    m["field"] = a.field;
    m["seed"] = a.seed;
    m["max_disp_voxels"] = round_sig6(gf.max_disp);
    m["invert_moving"] = a.invert_moving;
    m["inputs"] = json::object();
    m["products"] = {"fixed.nii",     "moving.nii",     "fixed_seg.nii", "moving_seg.nii",
                     "fixed_lms.csv", "moving_lms.csv", "u_true.nii",    "manifest.json"};
    write_json(path("manifest.json"), m);
    std::cout << "regmod synth: wrote " << a.out << " (max disp " << round_sig6(gf.max_disp)
              << " voxels)\n";
    return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
    CLI::App app{"regmod: deformable image registration and evaluation toolkit"};
    app.require_subcommand(1);

    RegisterArgs ra;
    auto* reg = app.add_subcommand("register", "register a moving image onto a fixed image");
    reg->add_option("--fixed", ra.fixed, "fixed image (.nii)")->required();
    reg->add_option("--moving", ra.moving, "moving image (.nii)")->required();
    reg->add_option("--config", ra.config, "JSON config overriding the preset");
    reg->add_option("--preset", ra.preset, "BASE, D, DWP, DWCP or DWCPI")
        ->check(CLI::IsMember({"BASE", "D", "DWP", "DWCP", "DWCPI"}));
    reg->add_option("--direction", ra.direction, "fwd, bwd or both")
        ->check(CLI::IsMember({"fwd", "bwd", "both"}));
    reg->add_option("--out", ra.out, "output directory")->required();

    EvaluateArgs ea;
    auto* ev = app.add_subcommand("evaluate", "evaluate a displacement field");
    ev->add_option("--disp", ea.disp, "displacement field (.nii)")->required();
    ev->add_option("--fixed-seg", ea.fixed_seg, "fixed label map");
    ev->add_option("--moving-seg", ea.moving_seg, "moving label map (warped before comparison)");
    ev->add_option("--labels", ea.labels, "comma-separated label ids (default: labels present)");
    ev->add_option("--fixed-lms", ea.fixed_lms, "fixed landmarks CSV");
    ev->add_option("--moving-lms", ea.moving_lms, "moving landmarks CSV");
    ev->add_option("--mask", ea.mask, "regularity mask label map (nonzero = inside)");
    ev->add_option("--nsd-tau", ea.tau, "surface-dice tolerance in mm (default 1.0)");
    ev->add_option("--ndv-unit", ea.ndv_unit, "percent or per_10k")
        ->check(CLI::IsMember({"percent", "per_10k"}));
    ev->add_option("--report", ea.report, "output report JSON")->required();

    JacobianArgs ja;
    auto* jc = app.add_subcommand("jacobian", "Jacobian determinant of a displacement field");
    jc->add_option("--disp", ja.disp, "displacement field (.nii)")->required();
    jc->add_option("--out", ja.out, "determinant volume (.nii)");
    jc->add_option("--summary", ja.summary, "summary JSON (SD log J, NDV)");

    SynthArgs sa;
    auto* sy = app.add_subcommand("synth", "generate a synthetic ground-truth pair");
    sy->add_option("--kind", sa.kind, "blobs, grid or two-tissue")->required();
    sy->add_option("--dims", sa.dims, "extent per axis, e.g. 64 or 64,64,32");
    sy->add_option("--ndim", sa.ndim, "2 or 3 (default 3)")->check(CLI::IsMember({2, 3}));
    sy->add_option("--seed", sa.seed, "RNG seed");
    sy->add_option("--blobs", sa.blobs, "blob count for --kind blobs");
    sy->add_option("--field", sa.field, "affine or gaussian-bumps");
    sy->add_option("--max-disp", sa.max_disp, "ground-truth max displacement, voxels");
    sy->add_flag("--invert-moving", sa.invert_moving, "intensity-invert the moving image");
    sy->add_option("--out", sa.out, "output directory")->required();

    try {
        std::vector<std::string> rev(args.rbegin(), args.rend());
        app.parse(rev);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (app.got_subcommand(reg)) return do_register(ra);
        if (app.got_subcommand(ev)) return do_evaluate(ea);
        if (app.got_subcommand(jc)) return do_jacobian(ja);
        if (app.got_subcommand(sy)) return do_synth(sa);
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 3;
    } catch (const DataError& e) {
        std::cerr << "data error [" << e.code << "]: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}

}  // namespace regmod
