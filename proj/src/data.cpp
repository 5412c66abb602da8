#include "adaloc/data.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "adaloc/model_io.hpp"
#include "adaloc/rng.hpp"

namespace adaloc {

void Dataset::validate() const {
    if (samples.empty()) throw ValidationError("dataset is empty");
    if (class_count == 0) throw ValidationError("dataset class_count must be positive");
    for (const Sample& s : samples) {
        if (s.label >= class_count) throw ValidationError("dataset label out of range");
    }
}

namespace {

uint64_t split_stream(const std::string& split) {
    uint64_t h = 1469598103934665603ULL;
    for (char c : split) {
        h ^= uint8_t(c);
        h *= 1099511628211ULL;
    }
    return h;
}

}  // namespace

Dataset gen_blobs(const BlobsConfig& cfg) {
    if (cfg.class_count < 2) throw ValidationError("gen_blobs: need at least two classes");
    if (cfg.dim == 0 || cfg.per_class == 0) throw ValidationError("gen_blobs: empty geometry");

    Rng mean_rng(cfg.seed);
    std::vector<std::vector<double>> means(cfg.class_count, std::vector<double>(cfg.dim));
    for (auto& m : means) {
        double norm = 0.0;
        for (double& v : m) {
            v = mean_rng.normal();
            norm += v * v;
        }
        norm = std::sqrt(norm);
        if (norm == 0.0) norm = 1.0;
        for (double& v : m) v /= norm;
    }

    Rng noise_rng = Rng(cfg.seed).fork(split_stream(cfg.split));
    Dataset ds;
    ds.class_count = cfg.class_count;
    ds.split = cfg.split;
    {
        std::ostringstream p;
        p << "blobs(k=" << cfg.class_count << ",dim=" << cfg.dim << ",per_class=" << cfg.per_class
          << ",spread=" << cfg.spread << ",seed=" << cfg.seed << ",split=" << cfg.split << ")";
        ds.provenance = p.str();
    }
    ds.samples.reserve(cfg.class_count * cfg.per_class);
    for (size_t c = 0; c < cfg.class_count; ++c) {
        for (size_t s = 0; s < cfg.per_class; ++s) {
            Tensor x({cfg.dim});
            double norm = 0.0;
            for (size_t i = 0; i < cfg.dim; ++i) {
                x.data[i] = means[c][i] + cfg.spread * noise_rng.normal();
                norm += x.data[i] * x.data[i];
            }
            norm = std::sqrt(norm);
            if (norm > cfg.max_norm) {
                const double scale = cfg.max_norm / norm;
                for (double& v : x.data) v *= scale;
            }
            ds.samples.push_back({std::move(x), c});
        }
    }
    return ds;
}

Dataset gen_image_task(const ImageTaskConfig& cfg) {
    if (cfg.class_count < 2) throw ValidationError("gen_image_task: need at least two classes");
    constexpr size_t kSide = 28;

    Rng proto_rng(cfg.seed);
    std::vector<std::vector<double>> protos(cfg.class_count, std::vector<double>(kSide * kSide, 0.0));
    for (auto& img : protos) {
        for (size_t b = 0; b < cfg.bumps; ++b) {
            const double cy = proto_rng.uniform(4.0, 24.0);
            const double cx = proto_rng.uniform(4.0, 24.0);
            const double s = proto_rng.uniform(2.0, 4.5);
            for (size_t y = 0; y < kSide; ++y) {
                for (size_t x = 0; x < kSide; ++x) {
                    const double dy = double(y) - cy, dx = double(x) - cx;
                    img[y * kSide + x] += std::exp(-(dy * dy + dx * dx) / (2.0 * s * s));
                }
            }
        }
        double peak = 0.0;
        for (double v : img) peak = std::max(peak, v);
        if (peak > 0.0) {
            for (double& v : img) v /= peak;
        }
    }

    Rng noise_rng = Rng(cfg.seed).fork(split_stream(cfg.split));
    Dataset ds;
    ds.class_count = cfg.class_count;
    ds.split = cfg.split;
    {
        std::ostringstream p;
        p << "image_task(k=" << cfg.class_count << ",per_class=" << cfg.per_class
          << ",noise=" << cfg.noise << ",bumps=" << cfg.bumps << ",seed=" << cfg.seed
          << ",split=" << cfg.split << ")";
        ds.provenance = p.str();
    }
    ds.samples.reserve(cfg.class_count * cfg.per_class);
    for (size_t c = 0; c < cfg.class_count; ++c) {
        for (size_t s = 0; s < cfg.per_class; ++s) {
            const double brightness = noise_rng.uniform(0.7, 1.0);
            Tensor x({kSide * kSide});
            for (size_t i = 0; i < kSide * kSide; ++i) {
                double v = protos[c][i] * brightness + cfg.noise * noise_rng.normal();
                // Quantize to bytes so the sample survives an IDX round trip.
                v = std::min(1.0, std::max(0.0, v));
                x.data[i] = std::round(v * 255.0) / 255.0;
            }
            ds.samples.push_back({std::move(x), c});
        }
    }
    return ds;
}

namespace {

std::string read_file_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path);
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

uint32_t be32(const std::string& bytes, size_t offset) {
    return (uint32_t(uint8_t(bytes[offset])) << 24) | (uint32_t(uint8_t(bytes[offset + 1])) << 16) |
           (uint32_t(uint8_t(bytes[offset + 2])) << 8) | uint32_t(uint8_t(bytes[offset + 3]));
}

void append_be32(std::string& out, uint32_t v) {
    out.push_back(char(uint8_t(v >> 24)));
    out.push_back(char(uint8_t(v >> 16)));
    out.push_back(char(uint8_t(v >> 8)));
    out.push_back(char(uint8_t(v)));
}

void require_bytes(const std::string& bytes, size_t needed, const std::string& path) {
    if (bytes.size() < needed) {
        throw ParseError("IDX file truncated: " + path + " (missing " +
                         std::to_string(needed - bytes.size()) + " bytes)");
    }
}

}  // namespace

Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
    const std::string img = read_file_bytes(images_path);
    require_bytes(img, 16, images_path);
    if (be32(img, 0) != 0x00000803u) throw ParseError("bad IDX image magic in " + images_path);
    const size_t count = be32(img, 4);
    const size_t rows = be32(img, 8);
    const size_t cols = be32(img, 12);
    const size_t pixels = rows * cols;
    require_bytes(img, 16 + count * pixels, images_path);

    const std::string lab = read_file_bytes(labels_path);
    require_bytes(lab, 8, labels_path);
    if (be32(lab, 0) != 0x00000801u) throw ParseError("bad IDX label magic in " + labels_path);
    if (be32(lab, 4) != count) throw ParseError("IDX image/label counts differ");
    require_bytes(lab, 8 + count, labels_path);

    Dataset ds;
    ds.split = "file";
    ds.provenance = images_path;
    size_t max_label = 0;
    ds.samples.reserve(count);
    for (size_t n = 0; n < count; ++n) {
        Tensor x({pixels});
        const size_t base = 16 + n * pixels;
        for (size_t i = 0; i < pixels; ++i) x.data[i] = double(uint8_t(img[base + i])) / 255.0;
        const size_t label = uint8_t(lab[8 + n]);
        max_label = std::max(max_label, label);
        ds.samples.push_back({std::move(x), label});
    }
    ds.class_count = max_label + 1;
    ds.validate();
    return ds;
}

void write_idx(const Dataset& dataset, const std::string& images_path, const std::string& labels_path) {
    dataset.validate();
    const size_t pixels = dataset.input_dim();
    size_t side = size_t(std::lround(std::sqrt(double(pixels))));
    if (side * side != pixels) throw ValidationError("write_idx: inputs must be square images");

    std::string img;
    img.reserve(16 + dataset.size() * pixels);
    append_be32(img, 0x00000803u);
    append_be32(img, uint32_t(dataset.size()));
    append_be32(img, uint32_t(side));
    append_be32(img, uint32_t(side));
    std::string lab;
    lab.reserve(8 + dataset.size());
    append_be32(lab, 0x00000801u);
    append_be32(lab, uint32_t(dataset.size()));
    for (const Sample& s : dataset.samples) {
        for (double v : s.input.data) {
            const double clamped = std::min(1.0, std::max(0.0, v));
            img.push_back(char(uint8_t(std::lround(clamped * 255.0))));
        }
        lab.push_back(char(uint8_t(s.label)));
    }
    atomic_write_file(images_path, img);
    atomic_write_file(labels_path, lab);
}

Dataset load_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open: " + path);
    std::string line;
    if (!std::getline(in, line)) throw ParseError("CSV has no header row: " + path);

    auto split_fields = [](const std::string& text) {
        std::vector<std::string> fields;
        std::string field;
        std::istringstream ss(text);
        while (std::getline(ss, field, ',')) fields.push_back(field);
        return fields;
    };

    const std::vector<std::string> header = split_fields(line);
    long label_col = -1;
    for (size_t i = 0; i < header.size(); ++i) {
        if (header[i] == "label") label_col = long(i);
    }
    if (label_col < 0) throw ParseError("CSV header has no \"label\" column: " + path);

    Dataset ds;
    ds.split = "file";
    ds.provenance = path;
    size_t max_label = 0;
    size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const std::vector<std::string> fields = split_fields(line);
        if (fields.size() != header.size()) {
            throw ParseError("CSV row " + std::to_string(line_no) + " has wrong field count");
        }
        Tensor x({header.size() - 1});
        size_t xi = 0;
        size_t label = 0;
        for (size_t i = 0; i < fields.size(); ++i) {
            try {
                if (long(i) == label_col) label = size_t(std::stoul(fields[i]));
                else x.data[xi++] = std::stod(fields[i]);
            } catch (const std::exception&) {
                throw ParseError("CSV row " + std::to_string(line_no) + ": bad numeric field");
            }
        }
        max_label = std::max(max_label, label);
        ds.samples.push_back({std::move(x), label});
    }
    ds.class_count = max_label + 1;
    ds.validate();
    return ds;
}

size_t argmax_lowest(const double* values, size_t n) {
    size_t best = 0;
    for (size_t i = 1; i < n; ++i) {
        if (values[i] > values[best]) best = i;
    }
    return best;
}

EvalReport evaluate(const ParameterStore& params, const Dataset& dataset) {
    dataset.validate();
    if (dataset.class_count != params.spec.class_count)
        throw DimensionError("evaluate: dataset classes do not match the network");

    EvalReport report;
    report.sample_count = dataset.size();
    report.per_class_accuracy.assign(dataset.class_count, 0.0);
    std::vector<size_t> per_class_total(dataset.class_count, 0);

    const bool dense_only = params.spec.input_shape[0] == 0;
    size_t correct = 0;
    if (dense_only) {
        // Batched path, chunked to keep the working set small.
        const size_t chunk = 256;
        const size_t dim = params.spec.input_dim;
        for (size_t start = 0; start < dataset.size(); start += chunk) {
            const size_t n = std::min(chunk, dataset.size() - start);
            Tensor X({n, dim});
            for (size_t r = 0; r < n; ++r) {
                const Tensor& x = dataset.samples[start + r].input;
                if (x.size() != dim) throw DimensionError("evaluate: input size mismatch");
                std::copy(x.data.begin(), x.data.end(), X.data.begin() + long(r * dim));
            }
            const Tensor logits = forward_batch(params, X);
            const size_t k = params.spec.class_count;
            for (size_t r = 0; r < n; ++r) {
                const size_t label = dataset.samples[start + r].label;
                const size_t pred = argmax_lowest(&logits.data[r * k], k);
                per_class_total[label] += 1;
                if (pred == label) {
                    ++correct;
                    report.per_class_accuracy[label] += 1.0;
                }
            }
        }
    } else {
        for (const Sample& s : dataset.samples) {
            Tensor x = s.input;
            if (x.rank() == 1) x.shape = {params.spec.input_shape[0], params.spec.input_shape[1],
                                          params.spec.input_shape[2]};
            const Tensor logits = forward(params, x);
            const size_t pred = argmax_lowest(logits.data.data(), logits.size());
            per_class_total[s.label] += 1;
            if (pred == s.label) {
                ++correct;
                report.per_class_accuracy[s.label] += 1.0;
            }
        }
    }
    for (size_t c = 0; c < dataset.class_count; ++c) {
        report.per_class_accuracy[c] =
            per_class_total[c] ? report.per_class_accuracy[c] / double(per_class_total[c]) : 0.0;
    }
    report.accuracy = double(correct) / double(report.sample_count);
    report.metric_m = 1.0 - report.accuracy;
    return report;
}

}  // namespace adaloc
