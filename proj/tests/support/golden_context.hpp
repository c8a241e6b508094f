#pragma once

// Inputs behind the frozen prompt fixtures.

#include "pelnas/pelnas.hpp"

namespace pelnas::support {

inline auto golden_context() -> GenerationContext
{
    GenerationContext ctx;
    ctx.device = "edgegpu";
    ctx.dataset = "cifar10";
    ctx.niche = NicheSet::complexity_default().predicate(NicheId{3});
    ctx.niche_id = 3;
    ctx.parents = {
        {"|nor_conv_3x3~0|+|skip_connect~0|nor_conv_1x1~1|+|none~0|nor_conv_3x3~1|avg_pool_3x3~2|", 91.2, 12.4,
         "Two 3x3 convolutions on the main path with a cheap skip.", std::nullopt},
        {"|nor_conv_3x3~0|+|none~0|none~1|+|skip_connect~0|nor_conv_3x3~1|none~2|", 88.7, 9.85,
         "Zeroed side edges cut latency.", std::nullopt},
    };
    ctx.kb.add("Use skip_connect on edge (3<-0) because it adds accuracy at near-zero latency.", 1);
    ctx.kb.add("Avoid avg_pool_3x3 on more than one edge because it rarely helps accuracy.", 1);
    ctx.kb.add("Use none on edge (2<-1) because it trims latency with little accuracy loss.", 2);
    ctx.n_children = 2;
    ctx.latency_limit = 15.0;
    ctx.crossover_probability = 0.5;
    ctx.generation = 3;
    return ctx;
}

inline auto golden_results() -> std::vector<PromptArch>
{
    return {
        {"|nor_conv_3x3~0|+|skip_connect~0|none~1|+|none~0|nor_conv_3x3~1|avg_pool_3x3~2|", 90.4, 11.1,
         "Drop the 1x1 convolution on edge (2<-1).", true},
        {"|nor_conv_3x3~0|+|nor_conv_1x1~0|nor_conv_1x1~1|+|none~0|nor_conv_3x3~1|avg_pool_3x3~2|", 89.9, 14.2,
         "Add a 1x1 convolution on edge (2<-0).", false},
    };
}

} // namespace pelnas::support
