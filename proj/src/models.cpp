#include "fairgkd/models.hpp"

#include <fstream>

namespace fairgkd {

std::string to_string(Backbone b) {
    return b == Backbone::Gcn ? "gcn" : "gin";
}

Backbone backbone_from_string(const std::string& s) {
    if (s == "gcn") return Backbone::Gcn;
    if (s == "gin") return Backbone::Gin;
    throw UsageError("unknown backbone '" + s + "' (expected gcn or gin)");
}

namespace {

// Small nonzero bias init. Exact zeros would let a ReLU-dead row turn into
// an exactly-zero representation row, which the contrastive objective
// rejects (cosine of a zero vector is undefined).
fairgkd::Tensor bias_init(int out_dim) {
    return fairgkd::Tensor(1, out_dim, 0.01);
}

} // namespace

Tensor gcn_layer(const CsrPtr& adj_norm, const Tensor& h, const Tensor& w, const Tensor& b,
                 Activation act) {
    Tensor out = add(spmm(adj_norm, matmul(h, w)), b);
    return act == Activation::Relu ? relu(out) : out;
}

Tensor gin_layer(const CsrPtr& adj_raw, const Tensor& h, const Mlp& mlp, double eps) {
    return mlp.forward(add(scale(h, 1.0 + eps), spmm(adj_raw, h)));
}

// ------------------------------- Linear / Mlp --------------------------------

Linear::Linear(int in_dim, int out_dim, Rng& rng)
    : weight(Tensor::glorot(in_dim, out_dim, rng)), bias(bias_init(out_dim)) {
    weight.set_requires_grad(true);
    bias.set_requires_grad(true);
}

Tensor Linear::forward(const Tensor& x) const {
    return add(matmul(x, weight), bias);
}

Mlp::Mlp(const std::vector<int>& dims, Rng& rng) {
    if (dims.size() < 2) throw ContractError("Mlp: need at least an input and an output dim");
    for (size_t i = 0; i + 1 < dims.size(); ++i)
        layers.emplace_back(dims[i], dims[i + 1], rng);
}

Tensor Mlp::forward(const Tensor& x) const {
    Tensor h = x;
    for (size_t i = 0; i < layers.size(); ++i) {
        if (i > 0) h = relu(h);
        h = layers[i].forward(h);
    }
    return h;
}

std::vector<Tensor> Mlp::parameters() const {
    std::vector<Tensor> out;
    for (const auto& l : layers)
        for (auto& p : l.parameters()) out.push_back(p);
    return out;
}

namespace modeldetail {
void set_frozen(std::vector<Tensor> params, bool frozen) {
    for (Tensor& p : params) p.set_requires_grad(!frozen);
}
} // namespace modeldetail

// ----------------------------- AttributeExpert -------------------------------

AttributeExpert::AttributeExpert(int in_dim, int hidden, Rng& rng)
    : body_({in_dim, hidden, hidden}, rng) {}

Tensor AttributeExpert::representation(const ViewData& view) const {
    if (view.kind != ViewKind::NodesOnly)
        throw ContractError("AttributeExpert: expected a nodes-only view, got " +
                            to_string(view.kind));
    return body_.forward(view.attrs);
}

void AttributeExpert::freeze() {
    modeldetail::set_frozen(parameters(), true);
    frozen_ = true;
}

// ----------------------------- StructureExpert -------------------------------

StructureExpert::StructureExpert(int in_dim, int hidden, Rng& rng)
    : weight_(Tensor::glorot(in_dim, hidden, rng)), bias_(bias_init(hidden)) {
    weight_.set_requires_grad(true);
    bias_.set_requires_grad(true);
}

Tensor StructureExpert::representation(const ViewData& view) const {
    if (view.kind != ViewKind::TopologyOnly)
        throw ContractError("StructureExpert: expected a topology-only view, got " +
                            to_string(view.kind));
    return gcn_layer(view.adj_norm, view.attrs, weight_, bias_);
}

void StructureExpert::freeze() {
    modeldetail::set_frozen(parameters(), true);
    frozen_ = true;
}

// ----------------------------- FusionProjector -------------------------------

FusionProjector::FusionProjector(int expert_hidden, int out_dim, Rng& rng)
    : body_({2 * expert_hidden, out_dim, out_dim, out_dim}, rng) {}

Tensor FusionProjector::fuse(const Tensor& attr_rep, const Tensor& struct_rep) const {
    return body_.forward(concat_cols(attr_rep, struct_rep));
}

void FusionProjector::freeze() {
    modeldetail::set_frozen(parameters(), true);
    frozen_ = true;
}

// -------------------------------- StudentNet ---------------------------------

StudentNet::StudentNet(Backbone backbone, int in_dim, int hidden, Rng& rng)
    : spec_{backbone, in_dim, hidden} {
    if (backbone == Backbone::Gcn) {
        conv_weight_ = Tensor::glorot(in_dim, hidden, rng);
        conv_bias_ = bias_init(hidden);
        conv_weight_.set_requires_grad(true);
        conv_bias_.set_requires_grad(true);
    } else {
        gin_mlp_ = Mlp({in_dim, hidden, hidden}, rng);
    }
    head_ = Linear(hidden, 1, rng);
}

Tensor StudentNet::representation(const ViewData& view) const {
    if (view.attrs.cols() != spec_.in_dim)
        throw ContractError("StudentNet: view width " + std::to_string(view.attrs.cols()) +
                            " does not match model input dim " + std::to_string(spec_.in_dim));
    if (spec_.backbone == Backbone::Gcn)
        return gcn_layer(view.adj_norm, view.attrs, conv_weight_, conv_bias_);
    return gin_layer(view.adj_raw, view.attrs, gin_mlp_);
}

Tensor StudentNet::logits_from(const Tensor& rep) const {
    return head_.forward(relu(rep));
}

std::pair<Tensor, Tensor> StudentNet::forward(const ViewData& view) const {
    Tensor rep = representation(view);
    return {rep, logits_from(rep)};
}

std::vector<Tensor> StudentNet::parameters() const {
    std::vector<Tensor> out;
    if (spec_.backbone == Backbone::Gcn) {
        out.push_back(conv_weight_);
        out.push_back(conv_bias_);
    } else {
        for (auto& p : gin_mlp_.parameters()) out.push_back(p);
    }
    out.push_back(head_.weight);
    out.push_back(head_.bias);
    return out;
}

void StudentNet::freeze() {
    modeldetail::set_frozen(parameters(), true);
    frozen_ = true;
}

std::vector<int8_t> StudentNet::predictions(const Tensor& logits) {
    std::vector<int8_t> preds(static_cast<size_t>(logits.rows()));
    for (int i = 0; i < logits.rows(); ++i)
        preds[static_cast<size_t>(i)] = logits(i, 0) >= 0.0 ? 1 : 0;
    return preds;
}

void StudentNet::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write checkpoint " + path);
    const char magic[4] = {'F', 'G', 'K', 'D'};
    out.write(magic, 4);
    const int32_t backbone = spec_.backbone == Backbone::Gcn ? 0 : 1;
    const int32_t in_dim = spec_.in_dim;
    const int32_t hidden = spec_.hidden;
    out.write(reinterpret_cast<const char*>(&backbone), sizeof(backbone));
    out.write(reinterpret_cast<const char*>(&in_dim), sizeof(in_dim));
    out.write(reinterpret_cast<const char*>(&hidden), sizeof(hidden));
    const auto params = parameters();
    const int32_t count = static_cast<int32_t>(params.size());
    out.write(reinterpret_cast<const char*>(&count), sizeof(count));
    for (const Tensor& p : params) write_tensor(out, p);
    if (!out) throw DataError("write failed for checkpoint " + path);
}

StudentNet StudentNet::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open checkpoint " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || magic[0] != 'F' || magic[1] != 'G' || magic[2] != 'K' || magic[3] != 'D')
        throw DataError("checkpoint " + path + ": bad magic");
    int32_t backbone = 0, in_dim = 0, hidden = 0, count = 0;
    in.read(reinterpret_cast<char*>(&backbone), sizeof(backbone));
    in.read(reinterpret_cast<char*>(&in_dim), sizeof(in_dim));
    in.read(reinterpret_cast<char*>(&hidden), sizeof(hidden));
    in.read(reinterpret_cast<char*>(&count), sizeof(count));
    if (!in || in_dim <= 0 || hidden <= 0) throw DataError("checkpoint " + path + ": bad header");
    Rng throwaway(0);
    StudentNet net(backbone == 0 ? Backbone::Gcn : Backbone::Gin, in_dim, hidden, throwaway);
    auto params = net.parameters();
    if (count != static_cast<int32_t>(params.size()))
        throw DataError("checkpoint " + path + ": parameter count mismatch");
    for (Tensor& p : params) {
        const Tensor loaded = read_tensor(in);
        if (loaded.rows() != p.rows() || loaded.cols() != p.cols())
            throw DataError("checkpoint " + path + ": parameter shape mismatch");
        p.assign_values(loaded.data());
    }
    return net;
}

// ----------------------------- SyntheticTeacher ------------------------------

Tensor SyntheticTeacher::representation(const ViewData& nodes_view,
                                        const ViewData& topo_view) const {
    if (!attr_expert.frozen() || !struct_expert.frozen() || !projector.frozen())
        throw ContractError("SyntheticTeacher: experts and projector must be frozen");
    return projector.fuse(attr_expert.representation(nodes_view),
                          struct_expert.representation(topo_view));
}

std::vector<Tensor> SyntheticTeacher::parameters() const {
    std::vector<Tensor> out;
    for (auto& p : attr_expert.parameters()) out.push_back(p);
    for (auto& p : struct_expert.parameters()) out.push_back(p);
    for (auto& p : projector.parameters()) out.push_back(p);
    return out;
}

} // namespace fairgkd
