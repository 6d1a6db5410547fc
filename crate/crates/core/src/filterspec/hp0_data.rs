//! Magnitude response of the magnetic-bearing compensator, tabulated at
//! normalized frequencies 0.00, 0.01, ..., 1.00.

pub const HP0_RESPONSE: [f64; 101] = [
    0.01997896950578355, 0.7101620632256287, 0.9039096080179476, 0.9609505189078075,
    0.9836379338588604, 0.994700396881582, 1.0008690497573036, 1.0046447327141095,
    1.0071183799521026, 1.0088249358402237, 1.0100509711015229, 1.0109609795665886,
    1.0116547571935135, 1.012195657854909, 1.0126254510373578, 1.0129725715336149,
    1.0132569152183268, 1.0134927385113728, 1.0136904718329536, 1.01385788791649,
    1.014000874386352, 1.014123956614239, 1.014230658971093, 1.0143237591105754,
    1.0144054699936893, 1.014477572193959, 1.014541511413719, 1.014598471282735,
    1.0146494283462684, 1.0146951940524276, 1.014736447135597, 1.0147737588262111,
    1.0148076126467267, 1.0148384200825373, 1.0148665330815216, 1.0148922540948997,
    1.0149158441968604, 1.0149375296918048, 1.0149575075227262, 1.0149759497229867,
    1.0149930071000521, 1.0150088122989465, 1.0150234823619473, 1.0150371208770121,
    1.0150498197887345, 1.0150616609310645, 1.0150727173295888, 1.0150830543121194,
    1.0150927304591606, 1.0151017984201003, 1.015110305616359, 1.0151182948490423,
    1.0151258048256158, 1.0151328706177094, 1.0151395240601369, 1.0151457940995923,
    1.0151517071001486, 1.0151572871115495, 1.0151625561053792, 1.0151675341834219,
    1.0151722397618879, 1.0151766897346253, 1.0151808996180218, 1.015184883679879,
    1.0151886550542555, 1.0151922258439823, 1.0151956072123296, 1.0151988094651045,
    1.0152018421242945, 1.0152047139942253, 1.015207433221076, 1.0152100073464863,
    1.0152124433559093, 1.0152147477222722, 1.0152169264454407, 1.0152189850879305,
    1.0152209288072471, 1.0152227623851995, 1.0152244902544822, 1.0152261165228047,
    1.0152276449947872, 1.0152290791918521, 1.0152304223702768, 1.0152316775375951,
    1.015232847467474, 1.0152339347132104, 1.0152349416199584, 1.015235870335791,
    1.015236722821692, 1.0152375008605523, 1.0152382060652494, 1.0152388398858745,
    1.015239403616158, 1.0152398983991473, 1.01524032523218, 1.015240684971187,
    1.0152409783343637, 1.0152412059052285, 1.0152413681350962, 1.0152414653449857,
    1.0152414977269706,
];
