#include "anomsynth/prompting.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "anomsynth/error.hpp"
#include "anomsynth/kernels.hpp"
#include "anomsynth/rng.hpp"

namespace anomsynth {

namespace {

constexpr const char* kTypeNames[kDefectTypeCount] = {
    "scratch", "stain", "hole", "crack", "contamination", "discoloration"};
constexpr const char* kShapeNames[kDefectShapeCount] = {"elongated", "blob", "irregular"};

}  // namespace

const char* to_string(DefectType t) { return kTypeNames[int(t)]; }
const char* to_string(DefectShape s) { return kShapeNames[int(s)]; }

DefectType defect_type_from_string(const std::string& s) {
    for (int i = 0; i < kDefectTypeCount; ++i)
        if (s == kTypeNames[i]) return DefectType(i);
    throw InvalidArgument("unknown defect type: " + s);
}

DefectShape defect_shape_from_string(const std::string& s) {
    for (int i = 0; i < kDefectShapeCount; ++i)
        if (s == kShapeNames[i]) return DefectShape(i);
    throw InvalidArgument("unknown defect shape: " + s);
}

std::string render_prompt_text(const PromptRecord& p) {
    char buf[256];
    std::snprintf(buf, sizeof buf,
                  "a %s %s defect covering %.6f of the image in box "
                  "[%.6f,%.6f]x[%.6f,%.6f] with tone %+.6f",
                  to_string(p.shape), to_string(p.type), p.size, p.location.x0,
                  p.location.y0, p.location.x1, p.location.y1, p.tone_mean());
    return buf;
}

double PromptEmbedding::norm() const {
    return std::sqrt(kernels::dot(v, v));
}

double cosine(const PromptEmbedding& a, const PromptEmbedding& b) {
    return kernels::dot(a.v, b.v);
}

PromptRecord sample_prompt(const PixelMask& mask, std::uint64_t seed) {
    if (mask.none_set()) throw EmptyMask("sample_prompt: mask has no set pixels");

    int minx = mask.width(), miny = mask.height(), maxx = -1, maxy = -1;
    std::size_t area = 0;
    for (int y = 0; y < mask.height(); ++y) {
        for (int x = 0; x < mask.width(); ++x) {
            if (!mask.at(x, y)) continue;
            ++area;
            minx = std::min(minx, x);
            miny = std::min(miny, y);
            maxx = std::max(maxx, x);
            maxy = std::max(maxy, y);
        }
    }

    PromptRecord p;
    p.location = {double(minx) / mask.width(), double(miny) / mask.height(),
                  double(maxx + 1) / mask.width(), double(maxy + 1) / mask.height()};
    p.size = double(area) / (double(mask.width()) * mask.height());

    Rng rng(derive_seed(seed, 0x9120417ull));
    p.type = DefectType(rng.next_below(kDefectTypeCount));
    p.shape = DefectShape(rng.next_below(kDefectShapeCount));
    const double tone = rng.uniform(-1.0, 1.0);
    p.color_tone = {tone, tone, tone};
    p.rendered_text = render_prompt_text(p);
    return p;
}

PromptEmbedding embed_prompt(const PromptRecord& p) {
    PromptEmbedding e;
    e.v[embed_layout::kType + int(p.type)] = 1.0;
    e.v[embed_layout::kShape + int(p.shape)] = 1.0;
    e.v[embed_layout::kSize] = p.size;
    e.v[embed_layout::kTone] = p.tone_mean();
    e.v[embed_layout::kCenterX] = p.location.center_x();
    e.v[embed_layout::kCenterY] = p.location.center_y();
    e.v[embed_layout::kExtentX] = p.location.extent_x();
    e.v[embed_layout::kExtentY] = p.location.extent_y();
    e.v[embed_layout::kTextureCollapse] = 0.0;
    const double n = e.norm();  // >= sqrt(2) from the two one-hots
    for (double& x : e.v) x /= n;
    return e;
}

namespace {

nlohmann::ordered_json prompt_to_json(const PromptRecord& p) {
    nlohmann::ordered_json j;
    j["type"] = to_string(p.type);
    j["location"] = {p.location.x0, p.location.y0, p.location.x1, p.location.y1};
    j["size"] = p.size;
    j["color_tone"] = {p.color_tone[0], p.color_tone[1], p.color_tone[2]};
    j["shape"] = to_string(p.shape);
    j["rendered_text"] = p.rendered_text;
    return j;
}

PromptRecord prompt_from_json(const nlohmann::json& j) {
    PromptRecord p;
    p.type = defect_type_from_string(j.at("type").get<std::string>());
    const auto& loc = j.at("location");
    p.location = {loc.at(0).get<double>(), loc.at(1).get<double>(),
                  loc.at(2).get<double>(), loc.at(3).get<double>()};
    p.size = j.at("size").get<double>();
    const auto& tone = j.at("color_tone");
    p.color_tone = {tone.at(0).get<double>(), tone.at(1).get<double>(),
                    tone.at(2).get<double>()};
    p.shape = defect_shape_from_string(j.at("shape").get<std::string>());
    p.rendered_text = j.at("rendered_text").get<std::string>();
    return p;
}

std::vector<std::filesystem::path> list_pnm(const std::filesystem::path& dir) {
    std::vector<std::filesystem::path> out;
    if (!std::filesystem::is_directory(dir)) return out;
    for (const auto& e : std::filesystem::directory_iterator(dir)) {
        if (!e.is_regular_file()) continue;
        const auto ext = e.path().extension();
        if (ext == ".pgm" || ext == ".ppm") out.push_back(e.path());
    }
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace

std::vector<Triplet> build_triplets(const std::filesystem::path& normal_dir,
                                    const std::filesystem::path& mask_pool_dir,
                                    int k_masks_per_image, std::uint64_t seed,
                                    const std::filesystem::path& out_dir) {
    const auto normals = list_pnm(normal_dir);
    const auto pool = list_pnm(mask_pool_dir);
    if (normals.empty()) throw EmptyCorpus("build_triplets: no normal images in " +
                                           normal_dir.string());
    if (pool.empty()) throw EmptyCorpus("build_triplets: no masks in " +
                                        mask_pool_dir.string());
    if (k_masks_per_image < 0) throw InvalidArgument("k_masks_per_image must be >= 0");

    std::filesystem::create_directories(out_dir / "masks");

    std::vector<Triplet> triplets;
    for (std::size_t ii = 0; ii < normals.size(); ++ii) {
        const Image img = read_image(normals[ii]);
        Rng pick_rng(derive_seed(seed, 0xA11000ull + ii));

        std::vector<std::size_t> picks;
        if (pool.size() >= std::size_t(k_masks_per_image)) {
            std::vector<std::size_t> idx(pool.size());
            for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
            pick_rng.shuffle(idx);
            picks.assign(idx.begin(), idx.begin() + k_masks_per_image);
        } else {
            for (int k = 0; k < k_masks_per_image; ++k)
                picks.push_back(pick_rng.next_below(pool.size()));
        }

        for (int k = 0; k < k_masks_per_image; ++k) {
            const PixelMask raw = read_mask(pool[picks[std::size_t(k)]]);
            PixelMask mask = resize_mask_nearest(raw, img.width(), img.height());
            if (mask.none_set() && !raw.none_set()) {
                // downscale can drop a sparse mask; keep the box center set
                int cx = 0, cy = 0, n = 0;
                for (int y = 0; y < raw.height(); ++y)
                    for (int x = 0; x < raw.width(); ++x)
                        if (raw.at(x, y)) {
                            cx += x;
                            cy += y;
                            ++n;
                        }
                mask.at(std::clamp(cx / n * img.width() / raw.width(), 0, img.width() - 1),
                        std::clamp(cy / n * img.height() / raw.height(), 0,
                                   img.height() - 1)) = 1;
            }

            const std::uint64_t trip_seed = derive_seed(derive_seed(seed, ii), std::uint64_t(k));
            Triplet t;
            t.seed = trip_seed;
            t.prompt = sample_prompt(mask, trip_seed);
            t.image_ref =
                std::filesystem::relative(normals[ii], out_dir).generic_string();
            const std::string mask_name =
                normals[ii].stem().string() + "_m" + std::to_string(k) + ".pgm";
            write_mask(mask, out_dir / "masks" / mask_name);
            t.mask_ref = "masks/" + mask_name;
            triplets.push_back(std::move(t));
        }
    }

    write_manifest(triplets, out_dir / "manifest.jsonl");
    return triplets;
}

void write_manifest(const std::vector<Triplet>& triplets,
                    const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoFailure("cannot open " + path.string() + " for writing");
    for (const Triplet& t : triplets) {
        nlohmann::ordered_json j;
        j["image"] = t.image_ref;
        j["mask"] = t.mask_ref;
        j["seed"] = t.seed;
        j["prompt"] = prompt_to_json(t.prompt);
        out << j.dump() << "\n";
    }
    if (!out) throw IoFailure("write failed: " + path.string());
}

std::vector<Triplet> read_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoFailure("cannot open " + path.string());
    std::vector<Triplet> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw MalformedHeader(path.string() + ": bad manifest line: " + e.what());
        }
        Triplet t;
        t.image_ref = j.at("image").get<std::string>();
        t.mask_ref = j.at("mask").get<std::string>();
        t.seed = j.at("seed").get<std::uint64_t>();
        t.prompt = prompt_from_json(j.at("prompt"));
        out.push_back(std::move(t));
    }
    return out;
}

}  // namespace anomsynth
