"""Fixed-point logistic CDF table.

SIGMOID_Q16[j] = round(65536 / (1 + exp(-j/256))) for j in 0..4096,
covering t in [0, 16] at step 1/256.  The table is embedded as data
(rather than computed at import) so the integer coding path never
depends on the platform's libm.
"""

import numpy as np

SIGMOID_Q16 = np.array([
    32768, 32832, 32896, 32960, 33024, 33088, 33152, 33216, 33280, 33344, 33408, 33472,
    33536, 33600, 33664, 33728, 33792, 33856, 33920, 33983, 34047, 34111, 34175, 34239,
    34303, 34367, 34431, 34494, 34558, 34622, 34686, 34750, 34813, 34877, 34941, 35005,
    35068, 35132, 35196, 35259, 35323, 35386, 35450, 35514, 35577, 35641, 35704, 35768,
    35831, 35894, 35958, 36021, 36085, 36148, 36211, 36275, 36338, 36401, 36464, 36527,
    36591, 36654, 36717, 36780, 36843, 36906, 36969, 37032, 37095, 37157, 37220, 37283,
    37346, 37409, 37471, 37534, 37597, 37659, 37722, 37784, 37847, 37909, 37972, 38034,
    38096, 38159, 38221, 38283, 38345, 38407, 38469, 38531, 38593, 38655, 38717, 38779,
    38841, 38903, 38965, 39026, 39088, 39149, 39211, 39272, 39334, 39395, 39457, 39518,
    39579, 39640, 39702, 39763, 39824, 39885, 39946, 40007, 40068, 40128, 40189, 40250,
    40310, 40371, 40432, 40492, 40552, 40613, 40673, 40733, 40793, 40854, 40914, 40974,
    41034, 41094, 41153, 41213, 41273, 41333, 41392, 41452, 41511, 41571, 41630, 41689,
    41748, 41808, 41867, 41926, 41985, 42044, 42102, 42161, 42220, 42279, 42337, 42396,
    42454, 42512, 42571, 42629, 42687, 42745, 42803, 42861, 42919, 42977, 43035, 43092,
    43150, 43208, 43265, 43322, 43380, 43437, 43494, 43551, 43608, 43665, 43722, 43779,
    43836, 43892, 43949, 44005, 44062, 44118, 44175, 44231, 44287, 44343, 44399, 44455,
    44511, 44566, 44622, 44678, 44733, 44789, 44844, 44899, 44954, 45009, 45065, 45119,
    45174, 45229, 45284, 45338, 45393, 45447, 45502, 45556, 45610, 45664, 45718, 45772,
    45826, 45880, 45934, 45987, 46041, 46094, 46148, 46201, 46254, 46307, 46360, 46413,
    46466, 46519, 46572, 46624, 46677, 46729, 46782, 46834, 46886, 46938, 46990, 47042,
    47094, 47146, 47197, 47249, 47300, 47352, 47403, 47454, 47505, 47556, 47607, 47658,
    47709, 47759, 47810, 47860, 47911, 47961, 48011, 48061, 48111, 48161, 48211, 48261,
    48310, 48360, 48409, 48459, 48508, 48557, 48606, 48655, 48704, 48753, 48802, 48850,
    48899, 48947, 48996, 49044, 49092, 49140, 49188, 49236, 49284, 49332, 49379, 49427,
    49474, 49521, 49569, 49616, 49663, 49710, 49757, 49803, 49850, 49897, 49943, 49989,
    50036, 50082, 50128, 50174, 50220, 50266, 50311, 50357, 50402, 50448, 50493, 50538,
    50584, 50629, 50674, 50718, 50763, 50808, 50852, 50897, 50941, 50985, 51030, 51074,
    51118, 51161, 51205, 51249, 51293, 51336, 51379, 51423, 51466, 51509, 51552, 51595,
    51638, 51681, 51723, 51766, 51808, 51851, 51893, 51935, 51977, 52019, 52061, 52103,
    52144, 52186, 52227, 52269, 52310, 52351, 52392, 52433, 52474, 52515, 52556, 52596,
    52637, 52677, 52718, 52758, 52798, 52838, 52878, 52918, 52957, 52997, 53037, 53076,
    53116, 53155, 53194, 53233, 53272, 53311, 53350, 53388, 53427, 53466, 53504, 53542,
    53581, 53619, 53657, 53695, 53733, 53770, 53808, 53846, 53883, 53920, 53958, 53995,
    54032, 54069, 54106, 54143, 54179, 54216, 54253, 54289, 54325, 54362, 54398, 54434,
    54470, 54506, 54541, 54577, 54613, 54648, 54684, 54719, 54754, 54789, 54824, 54859,
    54894, 54929, 54964, 54998, 55033, 55067, 55102, 55136, 55170, 55204, 55238, 55272,
    55306, 55339, 55373, 55406, 55440, 55473, 55506, 55539, 55572, 55605, 55638, 55671,
    55704, 55736, 55769, 55801, 55834, 55866, 55898, 55930, 55962, 55994, 56026, 56057,
    56089, 56121, 56152, 56183, 56215, 56246, 56277, 56308, 56339, 56370, 56401, 56431,
    56462, 56492, 56523, 56553, 56583, 56613, 56643, 56673, 56703, 56733, 56763, 56793,
    56822, 56852, 56881, 56910, 56939, 56969, 56998, 57027, 57055, 57084, 57113, 57142,
    57170, 57199, 57227, 57255, 57284, 57312, 57340, 57368, 57396, 57423, 57451, 57479,
    57506, 57534, 57561, 57589, 57616, 57643, 57670, 57697, 57724, 57751, 57778, 57804,
    57831, 57857, 57884, 57910, 57936, 57963, 57989, 58015, 58041, 58067, 58092, 58118,
    58144, 58169, 58195, 58220, 58246, 58271, 58296, 58321, 58346, 58371, 58396, 58421,
    58446, 58470, 58495, 58519, 58544, 58568, 58593, 58617, 58641, 58665, 58689, 58713,
    58737, 58760, 58784, 58808, 58831, 58855, 58878, 58902, 58925, 58948, 58971, 58994,
    59017, 59040, 59063, 59086, 59108, 59131, 59153, 59176, 59198, 59221, 59243, 59265,
    59287, 59309, 59331, 59353, 59375, 59397, 59418, 59440, 59462, 59483, 59505, 59526,
    59547, 59568, 59590, 59611, 59632, 59653, 59674, 59694, 59715, 59736, 59756, 59777,
    59797, 59818, 59838, 59858, 59879, 59899, 59919, 59939, 59959, 59979, 59999, 60018,
    60038, 60058, 60077, 60097, 60116, 60136, 60155, 60174, 60194, 60213, 60232, 60251,
    60270, 60289, 60307, 60326, 60345, 60364, 60382, 60401, 60419, 60437, 60456, 60474,
    60492, 60510, 60529, 60547, 60565, 60582, 60600, 60618, 60636, 60654, 60671, 60689,
    60706, 60724, 60741, 60758, 60776, 60793, 60810, 60827, 60844, 60861, 60878, 60895,
    60912, 60929, 60945, 60962, 60979, 60995, 61012, 61028, 61044, 61061, 61077, 61093,
    61109, 61125, 61141, 61157, 61173, 61189, 61205, 61221, 61237, 61252, 61268, 61283,
    61299, 61314, 61330, 61345, 61360, 61376, 61391, 61406, 61421, 61436, 61451, 61466,
    61481, 61496, 61511, 61525, 61540, 61555, 61569, 61584, 61598, 61613, 61627, 61641,
    61656, 61670, 61684, 61698, 61712, 61726, 61740, 61754, 61768, 61782, 61796, 61810,
    61823, 61837, 61850, 61864, 61878, 61891, 61904, 61918, 61931, 61944, 61958, 61971,
    61984, 61997, 62010, 62023, 62036, 62049, 62062, 62075, 62088, 62100, 62113, 62126,
    62138, 62151, 62163, 62176, 62188, 62201, 62213, 62225, 62238, 62250, 62262, 62274,
    62286, 62298, 62310, 62322, 62334, 62346, 62358, 62370, 62381, 62393, 62405, 62416,
    62428, 62439, 62451, 62462, 62474, 62485, 62497, 62508, 62519, 62530, 62542, 62553,
    62564, 62575, 62586, 62597, 62608, 62619, 62630, 62640, 62651, 62662, 62673, 62683,
    62694, 62705, 62715, 62726, 62736, 62747, 62757, 62767, 62778, 62788, 62798, 62809,
    62819, 62829, 62839, 62849, 62859, 62869, 62879, 62889, 62899, 62909, 62919, 62928,
    62938, 62948, 62958, 62967, 62977, 62987, 62996, 63006, 63015, 63025, 63034, 63043,
    63053, 63062, 63071, 63081, 63090, 63099, 63108, 63117, 63126, 63135, 63144, 63153,
    63162, 63171, 63180, 63189, 63198, 63207, 63215, 63224, 63233, 63241, 63250, 63259,
    63267, 63276, 63284, 63293, 63301, 63310, 63318, 63326, 63335, 63343, 63351, 63359,
    63368, 63376, 63384, 63392, 63400, 63408, 63416, 63424, 63432, 63440, 63448, 63456,
    63464, 63472, 63479, 63487, 63495, 63503, 63510, 63518, 63526, 63533, 63541, 63548,
    63556, 63563, 63571, 63578, 63586, 63593, 63600, 63608, 63615, 63622, 63630, 63637,
    63644, 63651, 63658, 63665, 63672, 63679, 63687, 63694, 63700, 63707, 63714, 63721,
    63728, 63735, 63742, 63749, 63755, 63762, 63769, 63776, 63782, 63789, 63796, 63802,
    63809, 63815, 63822, 63828, 63835, 63841, 63848, 63854, 63861, 63867, 63873, 63880,
    63886, 63892, 63898, 63905, 63911, 63917, 63923, 63929, 63935, 63941, 63948, 63954,
    63960, 63966, 63972, 63978, 63983, 63989, 63995, 64001, 64007, 64013, 64019, 64024,
    64030, 64036, 64042, 64047, 64053, 64059, 64064, 64070, 64075, 64081, 64087, 64092,
    64098, 64103, 64109, 64114, 64119, 64125, 64130, 64136, 64141, 64146, 64152, 64157,
    64162, 64167, 64173, 64178, 64183, 64188, 64193, 64198, 64203, 64209, 64214, 64219,
    64224, 64229, 64234, 64239, 64244, 64249, 64254, 64258, 64263, 64268, 64273, 64278,
    64283, 64287, 64292, 64297, 64302, 64306, 64311, 64316, 64321, 64325, 64330, 64334,
    64339, 64344, 64348, 64353, 64357, 64362, 64366, 64371, 64375, 64380, 64384, 64388,
    64393, 64397, 64402, 64406, 64410, 64415, 64419, 64423, 64427, 64432, 64436, 64440,
    64444, 64449, 64453, 64457, 64461, 64465, 64469, 64473, 64477, 64481, 64486, 64490,
    64494, 64498, 64502, 64506, 64509, 64513, 64517, 64521, 64525, 64529, 64533, 64537,
    64541, 64544, 64548, 64552, 64556, 64560, 64563, 64567, 64571, 64574, 64578, 64582,
    64585, 64589, 64593, 64596, 64600, 64604, 64607, 64611, 64614, 64618, 64621, 64625,
    64628, 64632, 64635, 64639, 64642, 64646, 64649, 64653, 64656, 64659, 64663, 64666,
    64669, 64673, 64676, 64679, 64683, 64686, 64689, 64693, 64696, 64699, 64702, 64705,
    64709, 64712, 64715, 64718, 64721, 64724, 64728, 64731, 64734, 64737, 64740, 64743,
    64746, 64749, 64752, 64755, 64758, 64761, 64764, 64767, 64770, 64773, 64776, 64779,
    64782, 64785, 64788, 64790, 64793, 64796, 64799, 64802, 64805, 64808, 64810, 64813,
    64816, 64819, 64822, 64824, 64827, 64830, 64832, 64835, 64838, 64841, 64843, 64846,
    64849, 64851, 64854, 64857, 64859, 64862, 64864, 64867, 64870, 64872, 64875, 64877,
    64880, 64882, 64885, 64887, 64890, 64892, 64895, 64897, 64900, 64902, 64905, 64907,
    64910, 64912, 64914, 64917, 64919, 64922, 64924, 64926, 64929, 64931, 64933, 64936,
    64938, 64940, 64943, 64945, 64947, 64949, 64952, 64954, 64956, 64958, 64961, 64963,
    64965, 64967, 64969, 64972, 64974, 64976, 64978, 64980, 64983, 64985, 64987, 64989,
    64991, 64993, 64995, 64997, 64999, 65001, 65004, 65006, 65008, 65010, 65012, 65014,
    65016, 65018, 65020, 65022, 65024, 65026, 65028, 65030, 65032, 65034, 65036, 65037,
    65039, 65041, 65043, 65045, 65047, 65049, 65051, 65053, 65055, 65056, 65058, 65060,
    65062, 65064, 65066, 65067, 65069, 65071, 65073, 65075, 65076, 65078, 65080, 65082,
    65084, 65085, 65087, 65089, 65091, 65092, 65094, 65096, 65097, 65099, 65101, 65102,
    65104, 65106, 65107, 65109, 65111, 65112, 65114, 65116, 65117, 65119, 65121, 65122,
    65124, 65125, 65127, 65129, 65130, 65132, 65133, 65135, 65136, 65138, 65139, 65141,
    65143, 65144, 65146, 65147, 65149, 65150, 65152, 65153, 65155, 65156, 65158, 65159,
    65160, 65162, 65163, 65165, 65166, 65168, 65169, 65171, 65172, 65173, 65175, 65176,
    65178, 65179, 65180, 65182, 65183, 65184, 65186, 65187, 65189, 65190, 65191, 65193,
    65194, 65195, 65197, 65198, 65199, 65200, 65202, 65203, 65204, 65206, 65207, 65208,
    65209, 65211, 65212, 65213, 65215, 65216, 65217, 65218, 65219, 65221, 65222, 65223,
    65224, 65226, 65227, 65228, 65229, 65230, 65232, 65233, 65234, 65235, 65236, 65237,
    65239, 65240, 65241, 65242, 65243, 65244, 65245, 65247, 65248, 65249, 65250, 65251,
    65252, 65253, 65254, 65255, 65257, 65258, 65259, 65260, 65261, 65262, 65263, 65264,
    65265, 65266, 65267, 65268, 65269, 65270, 65271, 65272, 65273, 65274, 65275, 65276,
    65277, 65278, 65279, 65280, 65281, 65282, 65283, 65284, 65285, 65286, 65287, 65288,
    65289, 65290, 65291, 65292, 65293, 65294, 65295, 65296, 65297, 65298, 65299, 65300,
    65300, 65301, 65302, 65303, 65304, 65305, 65306, 65307, 65308, 65309, 65309, 65310,
    65311, 65312, 65313, 65314, 65315, 65316, 65316, 65317, 65318, 65319, 65320, 65321,
    65321, 65322, 65323, 65324, 65325, 65326, 65326, 65327, 65328, 65329, 65330, 65330,
    65331, 65332, 65333, 65334, 65334, 65335, 65336, 65337, 65338, 65338, 65339, 65340,
    65341, 65341, 65342, 65343, 65344, 65344, 65345, 65346, 65347, 65347, 65348, 65349,
    65350, 65350, 65351, 65352, 65352, 65353, 65354, 65355, 65355, 65356, 65357, 65357,
    65358, 65359, 65359, 65360, 65361, 65362, 65362, 65363, 65364, 65364, 65365, 65366,
    65366, 65367, 65368, 65368, 65369, 65369, 65370, 65371, 65371, 65372, 65373, 65373,
    65374, 65375, 65375, 65376, 65376, 65377, 65378, 65378, 65379, 65380, 65380, 65381,
    65381, 65382, 65383, 65383, 65384, 65384, 65385, 65386, 65386, 65387, 65387, 65388,
    65388, 65389, 65390, 65390, 65391, 65391, 65392, 65392, 65393, 65394, 65394, 65395,
    65395, 65396, 65396, 65397, 65397, 65398, 65398, 65399, 65399, 65400, 65401, 65401,
    65402, 65402, 65403, 65403, 65404, 65404, 65405, 65405, 65406, 65406, 65407, 65407,
    65408, 65408, 65409, 65409, 65410, 65410, 65411, 65411, 65412, 65412, 65413, 65413,
    65414, 65414, 65415, 65415, 65416, 65416, 65416, 65417, 65417, 65418, 65418, 65419,
    65419, 65420, 65420, 65421, 65421, 65421, 65422, 65422, 65423, 65423, 65424, 65424,
    65425, 65425, 65425, 65426, 65426, 65427, 65427, 65428, 65428, 65428, 65429, 65429,
    65430, 65430, 65430, 65431, 65431, 65432, 65432, 65433, 65433, 65433, 65434, 65434,
    65435, 65435, 65435, 65436, 65436, 65436, 65437, 65437, 65438, 65438, 65438, 65439,
    65439, 65440, 65440, 65440, 65441, 65441, 65441, 65442, 65442, 65442, 65443, 65443,
    65444, 65444, 65444, 65445, 65445, 65445, 65446, 65446, 65446, 65447, 65447, 65447,
    65448, 65448, 65448, 65449, 65449, 65450, 65450, 65450, 65451, 65451, 65451, 65452,
    65452, 65452, 65452, 65453, 65453, 65453, 65454, 65454, 65454, 65455, 65455, 65455,
    65456, 65456, 65456, 65457, 65457, 65457, 65458, 65458, 65458, 65458, 65459, 65459,
    65459, 65460, 65460, 65460, 65461, 65461, 65461, 65461, 65462, 65462, 65462, 65463,
    65463, 65463, 65463, 65464, 65464, 65464, 65465, 65465, 65465, 65465, 65466, 65466,
    65466, 65466, 65467, 65467, 65467, 65468, 65468, 65468, 65468, 65469, 65469, 65469,
    65469, 65470, 65470, 65470, 65470, 65471, 65471, 65471, 65471, 65472, 65472, 65472,
    65472, 65473, 65473, 65473, 65473, 65474, 65474, 65474, 65474, 65475, 65475, 65475,
    65475, 65476, 65476, 65476, 65476, 65477, 65477, 65477, 65477, 65477, 65478, 65478,
    65478, 65478, 65479, 65479, 65479, 65479, 65479, 65480, 65480, 65480, 65480, 65481,
    65481, 65481, 65481, 65481, 65482, 65482, 65482, 65482, 65482, 65483, 65483, 65483,
    65483, 65484, 65484, 65484, 65484, 65484, 65485, 65485, 65485, 65485, 65485, 65486,
    65486, 65486, 65486, 65486, 65486, 65487, 65487, 65487, 65487, 65487, 65488, 65488,
    65488, 65488, 65488, 65489, 65489, 65489, 65489, 65489, 65489, 65490, 65490, 65490,
    65490, 65490, 65491, 65491, 65491, 65491, 65491, 65491, 65492, 65492, 65492, 65492,
    65492, 65492, 65493, 65493, 65493, 65493, 65493, 65493, 65494, 65494, 65494, 65494,
    65494, 65494, 65495, 65495, 65495, 65495, 65495, 65495, 65496, 65496, 65496, 65496,
    65496, 65496, 65497, 65497, 65497, 65497, 65497, 65497, 65497, 65498, 65498, 65498,
    65498, 65498, 65498, 65498, 65499, 65499, 65499, 65499, 65499, 65499, 65499, 65500,
    65500, 65500, 65500, 65500, 65500, 65500, 65501, 65501, 65501, 65501, 65501, 65501,
    65501, 65502, 65502, 65502, 65502, 65502, 65502, 65502, 65502, 65503, 65503, 65503,
    65503, 65503, 65503, 65503, 65504, 65504, 65504, 65504, 65504, 65504, 65504, 65504,
    65505, 65505, 65505, 65505, 65505, 65505, 65505, 65505, 65505, 65506, 65506, 65506,
    65506, 65506, 65506, 65506, 65506, 65507, 65507, 65507, 65507, 65507, 65507, 65507,
    65507, 65507, 65508, 65508, 65508, 65508, 65508, 65508, 65508, 65508, 65508, 65509,
    65509, 65509, 65509, 65509, 65509, 65509, 65509, 65509, 65509, 65510, 65510, 65510,
    65510, 65510, 65510, 65510, 65510, 65510, 65511, 65511, 65511, 65511, 65511, 65511,
    65511, 65511, 65511, 65511, 65511, 65512, 65512, 65512, 65512, 65512, 65512, 65512,
    65512, 65512, 65512, 65513, 65513, 65513, 65513, 65513, 65513, 65513, 65513, 65513,
    65513, 65513, 65514, 65514, 65514, 65514, 65514, 65514, 65514, 65514, 65514, 65514,
    65514, 65514, 65515, 65515, 65515, 65515, 65515, 65515, 65515, 65515, 65515, 65515,
    65515, 65515, 65516, 65516, 65516, 65516, 65516, 65516, 65516, 65516, 65516, 65516,
    65516, 65516, 65516, 65517, 65517, 65517, 65517, 65517, 65517, 65517, 65517, 65517,
    65517, 65517, 65517, 65517, 65517, 65518, 65518, 65518, 65518, 65518, 65518, 65518,
    65518, 65518, 65518, 65518, 65518, 65518, 65518, 65519, 65519, 65519, 65519, 65519,
    65519, 65519, 65519, 65519, 65519, 65519, 65519, 65519, 65519, 65519, 65520, 65520,
    65520, 65520, 65520, 65520, 65520, 65520, 65520, 65520, 65520, 65520, 65520, 65520,
    65520, 65520, 65521, 65521, 65521, 65521, 65521, 65521, 65521, 65521, 65521, 65521,
    65521, 65521, 65521, 65521, 65521, 65521, 65521, 65522, 65522, 65522, 65522, 65522,
    65522, 65522, 65522, 65522, 65522, 65522, 65522, 65522, 65522, 65522, 65522, 65522,
    65522, 65523, 65523, 65523, 65523, 65523, 65523, 65523, 65523, 65523, 65523, 65523,
    65523, 65523, 65523, 65523, 65523, 65523, 65523, 65523, 65523, 65524, 65524, 65524,
    65524, 65524, 65524, 65524, 65524, 65524, 65524, 65524, 65524, 65524, 65524, 65524,
    65524, 65524, 65524, 65524, 65524, 65524, 65525, 65525, 65525, 65525, 65525, 65525,
    65525, 65525, 65525, 65525, 65525, 65525, 65525, 65525, 65525, 65525, 65525, 65525,
    65525, 65525, 65525, 65525, 65525, 65525, 65526, 65526, 65526, 65526, 65526, 65526,
    65526, 65526, 65526, 65526, 65526, 65526, 65526, 65526, 65526, 65526, 65526, 65526,
    65526, 65526, 65526, 65526, 65526, 65526, 65526, 65527, 65527, 65527, 65527, 65527,
    65527, 65527, 65527, 65527, 65527, 65527, 65527, 65527, 65527, 65527, 65527, 65527,
    65527, 65527, 65527, 65527, 65527, 65527, 65527, 65527, 65527, 65527, 65527, 65527,
    65528, 65528, 65528, 65528, 65528, 65528, 65528, 65528, 65528, 65528, 65528, 65528,
    65528, 65528, 65528, 65528, 65528, 65528, 65528, 65528, 65528, 65528, 65528, 65528,
    65528, 65528, 65528, 65528, 65528, 65528, 65528, 65528, 65529, 65529, 65529, 65529,
    65529, 65529, 65529, 65529, 65529, 65529, 65529, 65529, 65529, 65529, 65529, 65529,
    65529, 65529, 65529, 65529, 65529, 65529, 65529, 65529, 65529, 65529, 65529, 65529,
    65529, 65529, 65529, 65529, 65529, 65529, 65529, 65529, 65530, 65530, 65530, 65530,
    65530, 65530, 65530, 65530, 65530, 65530, 65530, 65530, 65530, 65530, 65530, 65530,
    65530, 65530, 65530, 65530, 65530, 65530, 65530, 65530, 65530, 65530, 65530, 65530,
    65530, 65530, 65530, 65530, 65530, 65530, 65530, 65530, 65530, 65530, 65530, 65530,
    65530, 65530, 65530, 65531, 65531, 65531, 65531, 65531, 65531, 65531, 65531, 65531,
    65531, 65531, 65531, 65531, 65531, 65531, 65531, 65531, 65531, 65531, 65531, 65531,
    65531, 65531, 65531, 65531, 65531, 65531, 65531, 65531, 65531, 65531, 65531, 65531,
    65531, 65531, 65531, 65531, 65531, 65531, 65531, 65531, 65531, 65531, 65531, 65531,
    65531, 65531, 65531, 65531, 65531, 65531, 65531, 65532, 65532, 65532, 65532, 65532,
    65532, 65532, 65532, 65532, 65532, 65532, 65532, 65532, 65532, 65532, 65532, 65532,
    65532, 65532, 65532, 65532, 65532, 65532, 65532, 65532, 65532, 65532, 65532, 65532,
    65532, 65532, 65532, 65532, 65532, 65532, 65532, 65532, 65532, 65532, 65532, 65532,
    65532, 65532, 65532, 65532, 65532, 65532, 65532, 65532, 65532, 65532, 65532, 65532,
    65532, 65532, 65532, 65532, 65532, 65532, 65532, 65532, 65532, 65532, 65532, 65533,
    65533, 65533, 65533, 65533, 65533, 65533, 65533, 65533, 65533, 65533, 65533, 65533,
    65533, 65533, 65533, 65533, 65533, 65533, 65533, 65533, 65533, 65533, 65533, 65533,
    65533, 65533, 65533, 65533, 65533, 65533, 65533, 65533, 65533, 65533, 65533, 65533,
    65533, 65533, 65533, 65533, 65533, 65533, 65533, 65533, 65533, 65533, 65533, 65533,
    65533, 65533, 65533, 65533, 65533, 65533, 65533, 65533, 65533, 65533, 65533, 65533,
    65533, 65533, 65533, 65533, 65533, 65533, 65533, 65533, 65533, 65533, 65533, 65533,
    65533, 65533, 65533, 65533, 65533, 65533, 65533, 65533, 65533, 65533, 65533, 65533,
    65533, 65534, 65534, 65534, 65534, 65534, 65534, 65534, 65534, 65534, 65534, 65534,
    65534, 65534, 65534, 65534, 65534, 65534, 65534, 65534, 65534, 65534, 65534, 65534,
    65534, 65534, 65534, 65534, 65534, 65534, 65534, 65534, 65534, 65534, 65534, 65534,
    65534, 65534, 65534, 65534, 65534, 65534, 65534, 65534, 65534, 65534, 65534, 65534,
    65534, 65534, 65534, 65534, 65534, 65534, 65534, 65534, 65534, 65534, 65534, 65534,
    65534, 65534, 65534, 65534, 65534, 65534, 65534, 65534, 65534, 65534, 65534, 65534,
    65534, 65534, 65534, 65534, 65534, 65534, 65534, 65534, 65534, 65534, 65534, 65534,
    65534, 65534, 65534, 65534, 65534, 65534, 65534, 65534, 65534, 65534, 65534, 65534,
    65534, 65534, 65534, 65534, 65534, 65534, 65534, 65534, 65534, 65534, 65534, 65534,
    65534, 65534, 65534, 65534, 65534, 65534, 65534, 65534, 65534, 65534, 65534, 65534,
    65534, 65534, 65534, 65534, 65534, 65534, 65534, 65534, 65534, 65534, 65534, 65534,
    65535, 65535, 65535, 65535, 65535, 65535, 65535, 65535, 65535, 65535, 65535, 65535,
    65535, 65535, 65535, 65535, 65535, 65535, 65535, 65535, 65535, 65535, 65535, 65535,
    65535, 65535, 65535, 65535, 65535, 65535, 65535, 65535, 65535, 65535, 65535, 65535,
    65535, 65535, 65535, 65535, 65535, 65535, 65535, 65535, 65535, 65535, 65535, 65535,
    65535, 65535, 65535, 65535, 65535, 65535, 65535, 65535, 65535, 65535, 65535, 65535,
    65535, 65535, 65535, 65535, 65535, 65535, 65535, 65535, 65535, 65535, 65535, 65535,
    65535, 65535, 65535, 65535, 65535, 65535, 65535, 65535, 65535, 65535, 65535, 65535,
    65535, 65535, 65535, 65535, 65535, 65535, 65535, 65535, 65535, 65535, 65535, 65535,
    65535, 65535, 65535, 65535, 65535, 65535, 65535, 65535, 65535, 65535, 65535, 65535,
    65535, 65535, 65535, 65535, 65535, 65535, 65535, 65535, 65535, 65535, 65535, 65535,
    65535, 65535, 65535, 65535, 65535, 65535, 65535, 65535, 65535, 65535, 65535, 65535,
    65535, 65535, 65535, 65535, 65535, 65535, 65535, 65535, 65535, 65535, 65535, 65535,
    65535, 65535, 65535, 65535, 65535, 65535, 65535, 65535, 65535, 65535, 65535, 65535,
    65535, 65535, 65535, 65535, 65535, 65535, 65535, 65535, 65535, 65535, 65535, 65535,
    65535, 65535, 65535, 65535, 65535, 65535, 65535, 65535, 65535, 65535, 65535, 65535,
    65535, 65535, 65535, 65535, 65535, 65535, 65535, 65535, 65535, 65535, 65535, 65535,
    65535, 65535, 65535, 65535, 65535, 65535, 65535, 65535, 65535, 65535, 65535, 65535,
    65535, 65535, 65535, 65535, 65535, 65535, 65535, 65535, 65535, 65535, 65535, 65535,
    65535, 65535, 65535, 65535, 65535, 65535, 65535, 65535, 65535, 65535, 65535, 65535,
    65535, 65535, 65535, 65535, 65535, 65535, 65535, 65535, 65535, 65535, 65535, 65535,
    65535, 65535, 65535, 65535, 65535, 65535, 65535, 65535, 65535, 65535, 65535, 65535,
    65535, 65535, 65535, 65535, 65535, 65535, 65535, 65535, 65535, 65535, 65535, 65535,
    65535, 65535, 65535, 65535, 65535, 65535, 65535, 65535, 65535, 65535, 65535, 65535,
    65535, 65535, 65535, 65535, 65535, 65536, 65536, 65536, 65536, 65536, 65536, 65536,
    65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536,
    65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536,
    65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536,
    65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536,
    65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536,
    65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536,
    65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536,
    65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536,
    65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536,
    65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536,
    65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536,
    65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536,
    65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536,
    65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536,
    65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536,
    65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536,
    65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536,
    65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536,
    65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536,
    65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536,
    65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536,
    65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536,
    65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536,
    65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536,
    65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536,
    65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536,
    65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536,
    65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536,
    65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536,
    65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536,
    65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536,
    65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536,
    65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536,
    65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536,
    65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536,
    65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536,
    65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536,
    65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536,
    65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536,
    65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536,
    65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536,
    65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536,
    65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536,
    65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536,
    65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536,
    65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536,
    65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536,
    65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536,
    65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536,
    65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536,
    65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536,
    65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536,
    65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536,
    65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536,
    65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536,
    65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536,
    65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536,
    65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536,
    65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536,
    65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536,
    65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536,
    65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536,
    65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536,
    65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536,
    65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536,
    65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536,
    65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536,
    65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536,
    65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536,
    65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536,
    65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536,
    65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536,
    65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536,
    65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536,
    65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536,
    65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536,
    65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536,
    65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536,
    65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536,
    65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536,
    65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536,
    65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536,
    65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536,
    65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536,
    65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536,
    65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536,
    65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536,
    65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536,
    65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536, 65536,
    65536, 65536, 65536, 65536, 65536,
], dtype=np.int64)

