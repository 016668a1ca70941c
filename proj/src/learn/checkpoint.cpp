// SPDX-License-Identifier: Apache-2.0
//
// rispa: channel estimation with reduced RIS phase allocations

#include <cstdio>
#include <fstream>

#include "rispa/binary_io.hpp"
#include "rispa/errors.hpp"
#include "rispa/learn/trainer.hpp"

namespace rispa::learn {

namespace {

enum class LayerType : std::uint8_t { conv3x3 = 1, resize = 2 };

void write_vec(binio::Writer& w, const std::vector<double>& v)
{
    for (double x : v)
        w.f64(x);
}

void read_vec(binio::Reader& r, std::vector<double>& v, std::size_t n)
{
    v.resize(n);
    for (auto& x : v)
        x = r.f64();
}

} // namespace

// Layout: magic "RCNN" | u16 version | u32 M | u32 L | u32 N_v | u8 flags (bit0: first row locked)
//         | f64 input scale | u32 layer count | layer table | Phi ((L+1) x N_v, column-major)
//         | per layer parameters in table order.
// Table entry: u8 type | u32 in | u32 out | u8 activation | u8 batch-norm | u32 kernel width.
void save_checkpoint(const PhaseCnnModel& model, const std::filesystem::path& path)
{
    const CnnModel& cnn = model.cnn;
    if (!cnn.initialized())
        throw StateError("cannot checkpoint an uninitialized model");
    binio::Writer w(path);
    w.magic("RCNN");
    w.u16(checkpoint_format_version);
    w.u32(static_cast<std::uint32_t>(cnn.antennas));
    w.u32(static_cast<std::uint32_t>(cnn.columns - 1));
    w.u32(static_cast<std::uint32_t>(cnn.allocations));
    w.u8(model.phase.first_row_locked() ? 1 : 0);
    w.f64(cnn.input_scale);
    w.u32(static_cast<std::uint32_t>(cnn.convs.size() + 1));
    for (const auto& l : cnn.convs) {
        w.u8(static_cast<std::uint8_t>(LayerType::conv3x3));
        w.u32(static_cast<std::uint32_t>(l.in_channels));
        w.u32(static_cast<std::uint32_t>(l.out_channels));
        w.u8(static_cast<std::uint8_t>(l.activation));
        w.u8(l.batch_norm ? 1 : 0);
        w.u32(3);
    }
    w.u8(static_cast<std::uint8_t>(LayerType::resize));
    w.u32(static_cast<std::uint32_t>(cnn.resize.in_channels));
    w.u32(static_cast<std::uint32_t>(2 * cnn.resize.out_width));
    w.u8(static_cast<std::uint8_t>(Activation::identity));
    w.u8(0);
    w.u32(static_cast<std::uint32_t>(cnn.resize.in_width));

    const RMatrix& phi = model.phase.angles();
    for (Eigen::Index i = 0; i < phi.size(); ++i)
        w.f64(phi.data()[i]);

    for (const auto& l : cnn.convs) {
        write_vec(w, l.kernels);
        write_vec(w, l.biases);
        if (l.batch_norm) {
            write_vec(w, l.batch_norm->scale);
            write_vec(w, l.batch_norm->shift);
            write_vec(w, l.batch_norm->running_mean);
            write_vec(w, l.batch_norm->running_var);
            w.f64(l.batch_norm->momentum);
            w.f64(l.batch_norm->eps);
        }
    }
    write_vec(w, cnn.resize.kernels);
    write_vec(w, cnn.resize.biases);
    w.finish();
}

PhaseCnnModel load_checkpoint(const std::filesystem::path& path)
{
    binio::Reader r(path);
    r.expect_magic("RCNN");
    const auto version = r.u16();
    if (version != checkpoint_format_version)
        throw FormatError(FormatError::Kind::bad_version,
                          "'" + path.string() + "' has unsupported checkpoint version " + std::to_string(version));
    const std::size_t M = r.u32();
    const std::size_t L = r.u32();
    const std::size_t Nv = r.u32();
    const std::uint8_t flags = r.u8();
    if (M < 1 || L < 1 || Nv < 1 || (flags & ~std::uint8_t{1}))
        throw FormatError(FormatError::Kind::bad_header, "'" + path.string() + "' has an invalid checkpoint header");

    PhaseCnnModel model;
    CnnModel& cnn = model.cnn;
    cnn.antennas = M;
    cnn.allocations = Nv;
    cnn.columns = L + 1;
    cnn.input_scale = r.f64();
    const std::uint32_t count = r.u32();
    if (count < 2 || count > 4096)
        throw FormatError(FormatError::Kind::bad_header, "'" + path.string() + "' declares " + std::to_string(count) +
                                                             " layers");
    std::size_t expected_in = 2;
    for (std::uint32_t i = 0; i < count; ++i) {
        const auto type = static_cast<LayerType>(r.u8());
        const std::size_t in = r.u32();
        const std::size_t out = r.u32();
        const std::uint8_t act = r.u8();
        const std::uint8_t bn = r.u8();
        const std::size_t width = r.u32();
        if (act > static_cast<std::uint8_t>(Activation::elu) || bn > 1 || in != expected_in)
            throw FormatError(FormatError::Kind::inconsistent, "'" + path.string() + "' layer " + std::to_string(i) +
                                                                   " is inconsistent");
        const bool last = i + 1 == count;
        if (!last) {
            if (type != LayerType::conv3x3 || width != 3 || out < 1)
                throw FormatError(FormatError::Kind::inconsistent, "'" + path.string() + "' layer " +
                                                                       std::to_string(i) + " is not a 3x3 conv");
            ConvLayer l;
            l.in_channels = in;
            l.out_channels = out;
            l.activation = static_cast<Activation>(act);
            if (bn)
                l.batch_norm = BatchNorm{};
            cnn.convs.push_back(std::move(l));
            expected_in = out;
        } else {
            if (type != LayerType::resize || out != 2 * (L + 1) || width != Nv)
                throw FormatError(FormatError::Kind::inconsistent,
                                  "'" + path.string() + "' final layer does not match the declared dimensions");
            cnn.resize.in_channels = in;
            cnn.resize.in_width = Nv;
            cnn.resize.out_width = L + 1;
        }
    }

    model.phase = PhaseLayer(L, Nv, (flags & 1) != 0);
    RMatrix& phi = model.phase.angles();
    for (Eigen::Index i = 0; i < phi.size(); ++i)
        phi.data()[i] = r.f64();

    for (auto& l : cnn.convs) {
        read_vec(r, l.kernels, l.out_channels * l.in_channels * 9);
        read_vec(r, l.biases, l.out_channels);
        if (l.batch_norm) {
            read_vec(r, l.batch_norm->scale, l.out_channels);
            read_vec(r, l.batch_norm->shift, l.out_channels);
            read_vec(r, l.batch_norm->running_mean, l.out_channels);
            read_vec(r, l.batch_norm->running_var, l.out_channels);
            l.batch_norm->momentum = r.f64();
            l.batch_norm->eps = r.f64();
        }
    }
    read_vec(r, cnn.resize.kernels, 2 * (L + 1) * cnn.resize.in_channels * 3 * Nv);
    read_vec(r, cnn.resize.biases, 2 * (L + 1));
    if (!r.at_end())
        throw FormatError(FormatError::Kind::inconsistent, "'" + path.string() + "' has trailing bytes");
    return model;
}

void write_training_log(const std::vector<EpochLog>& log, const std::filesystem::path& path)
{
    std::ofstream out(path);
    if (!out)
        throw IoError("cannot open '" + path.string() + "' for writing");
    out << "epoch,train_loss,val_nmse\n";
    char buf[128];
    for (const auto& row : log) {
        std::snprintf(buf, sizeof buf, "%zu,%.10e,%.10e\n", row.epoch, row.train_loss, row.val_nmse);
        out << buf;
    }
    if (!out)
        throw IoError("write to '" + path.string() + "' failed");
}

} // namespace rispa::learn
