#include "situ/tnm/loss.hpp"

#include "situ/common/error.hpp"
#include "situ/numerics/ops.hpp"

namespace situ::tnm {

namespace {

Tensor column(const std::vector<onto::BBox>& boxes, double (*get)(const onto::BBox&)) {
    std::vector<double> v(boxes.size());
    for (std::size_t i = 0; i < boxes.size(); ++i) v[i] = get(boxes[i]);
    return Tensor::from({boxes.size(), 1}, std::move(v));
}

}  // namespace

Tensor giou_rows(const Tensor& pred, const std::vector<onto::BBox>& gold) {
    using namespace num;
    if (pred.rank() != 2 || pred.cols() != 4 || pred.rows() != gold.size())
        throw ShapeError("giou_rows: expected [" + std::to_string(gold.size()) + " x 4], got " +
                         shape_str(pred.shape()));
    const Tensor cx = slice_cols(pred, 0, 1), cy = slice_cols(pred, 1, 2);
    const Tensor w = slice_cols(pred, 2, 3), h = slice_cols(pred, 3, 4);
    const Tensor px1 = sub(cx, scale(w, 0.5)), px2 = add(cx, scale(w, 0.5));
    const Tensor py1 = sub(cy, scale(h, 0.5)), py2 = add(cy, scale(h, 0.5));
    const Tensor gx1 = column(gold, [](const onto::BBox& b) { return b.x1; });
    const Tensor gy1 = column(gold, [](const onto::BBox& b) { return b.y1; });
    const Tensor gx2 = column(gold, [](const onto::BBox& b) { return b.x2; });
    const Tensor gy2 = column(gold, [](const onto::BBox& b) { return b.y2; });
    const Tensor garea = column(gold, [](const onto::BBox& b) { return b.area(); });

    const Tensor iw = relu(sub(minimum(px2, gx2), maximum(px1, gx1)));
    const Tensor ih = relu(sub(minimum(py2, gy2), maximum(py1, gy1)));
    const Tensor inter = mul(iw, ih);
    const Tensor uni = sub(add(mul(w, h), garea), inter);
    const Tensor enclosure =
        mul(sub(maximum(px2, gx2), minimum(px1, gx1)), sub(maximum(py2, gy2), minimum(py1, gy1)));
    return sub(div(inter, uni), div(sub(enclosure, uni), enclosure));
}

TnmLoss tnm_loss(const TnmOutput& out, const onto::GroundedFrame& gold, const LossWeights& weights,
                 const std::vector<bool>& include) {
    using namespace num;
    const std::size_t m = out.roles.size();
    if (gold.verb != out.verb || gold.roles.size() != m)
        throw PreconditionError("tnm_loss: gold frame does not match the decoded verb");
    if (!include.empty() && include.size() != m) throw ShapeError("tnm_loss: role mask size mismatch");
    auto used = [&](std::size_t i) { return include.empty() || include[i]; };

    std::vector<std::size_t> rows, targets, box_rows;
    std::vector<onto::BBox> gold_boxes;
    std::vector<double> presence_targets;
    for (std::size_t i = 0; i < m; ++i) {
        if (!used(i)) continue;
        const auto& r = gold.roles[i];
        if (r.role != out.roles[i]) throw PreconditionError("tnm_loss: role order mismatch");
        if (r.gold_nouns.empty()) throw SchemaError("tnm_loss: role without gold noun");
        rows.push_back(i);
        targets.push_back(r.gold_nouns.front());
        presence_targets.push_back(r.box ? 1.0 : 0.0);
        if (r.box) {
            box_rows.push_back(i);
            gold_boxes.push_back(*r.box);
        }
    }
    TnmLoss result;
    result.per_role.resize(m);
    if (rows.empty()) {
        result.total = Tensor::scalar(0.0);
        return result;
    }

    const Tensor xe = cross_entropy(gather_rows(out.noun_logits, rows), targets);
    for (std::size_t k = 0; k < rows.size(); ++k) result.per_role[rows[k]].noun = xe.values()[k];
    Tensor total = sum(xe);

    if (!box_rows.empty()) {
        const Tensor pred = gather_rows(out.boxes, box_rows);
        std::vector<double> g(4 * gold_boxes.size());
        for (std::size_t k = 0; k < gold_boxes.size(); ++k) {
            g[4 * k] = gold_boxes[k].cx();
            g[4 * k + 1] = gold_boxes[k].cy();
            g[4 * k + 2] = gold_boxes[k].w();
            g[4 * k + 3] = gold_boxes[k].h();
        }
        const Tensor l1 = scale(sum_rows(abs(sub(pred, Tensor::from({gold_boxes.size(), 4}, g)))), weights.l1);
        const Tensor gi = scale(add_scalar(neg(giou_rows(pred, gold_boxes)), 1.0), weights.giou);
        for (std::size_t k = 0; k < box_rows.size(); ++k) {
            result.per_role[box_rows[k]].l1 = l1.values()[k];
            result.per_role[box_rows[k]].giou = gi.values()[k];
        }
        total = add(total, add(sum(l1), sum(gi)));
    }

    if (!weights.always_present && weights.presence > 0.0) {
        const Tensor p = scale(bce_with_logits(gather_rows(out.presence_logits, rows), presence_targets),
                               weights.presence);
        for (std::size_t k = 0; k < rows.size(); ++k) result.per_role[rows[k]].presence = p.values()[k];
        total = add(total, sum(p));
    }
    for (auto& r : result.per_role) r.total = r.noun + r.giou + r.l1 + r.presence;
    result.total = total;
    return result;
}

}  // namespace situ::tnm
